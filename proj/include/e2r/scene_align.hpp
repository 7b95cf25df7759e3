#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "e2r/gaze.hpp"
#include "e2r/image.hpp"

namespace e2r {

struct KeypointMatch {
  Point2 src_xy;
  Point2 dst_xy;
  double score = 0.0;
};

// Projective map, row-major, normalized so h[8] == 1.
struct Homography {
  std::array<double, 9> h{1, 0, 0, 0, 1, 0, 0, 0, 1};
  int inlier_count = 0;
  double reprojection_rmse_px = 0.0;

  static Homography identity() { return {}; }
  static Homography from_row_major(std::span<const double> values);

  double determinant() const;
  bool invertible() const;
  // Returns nullopt when the point maps to (or behind) the line at infinity.
  std::optional<Point2> apply(Point2 p) const;
  Homography inverse() const;
};

struct PhotoGazePoint {
  std::int64_t timestamp_us = 0;
  Point2 photo_xy;
  bool in_bounds = false;
};

struct Keypoint {
  Point2 xy;  // base-image pixels
  double response = 0.0;
  double angle = 0.0;
  int level = 0;
};

struct Feature {
  Keypoint keypoint;
  std::vector<float> descriptor;
};

// Detector + descriptor seam. Implementations must be deterministic.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<Feature> extract(const GrayImage& image) const = 0;
  virtual std::string name() const = 0;
};

// Harris corners over an image pyramid with an orientation-normalized,
// mean/contrast-normalized sampled patch as descriptor.
class CornerPatchExtractor final : public FeatureExtractor {
 public:
  struct Options {
    int levels = 3;
    int max_features_per_level = 400;
    double harris_k = 0.04;
    double relative_threshold = 0.01;
    double min_response = 1e-4;
    int patch_radius = 12;
    int grid = 8;
  };

  CornerPatchExtractor() = default;
  explicit CornerPatchExtractor(Options opts) : opts_(opts) {}

  std::vector<Feature> extract(const GrayImage& image) const override;
  std::string name() const override { return "harris-pyramid+oriented-patch"; }

 private:
  Options opts_;
};

struct MatchOptions {
  double ratio = 0.8;
  bool mutual = true;
};

// Brute-force L2 matching with Lowe ratio test. src comes from `from`.
std::vector<KeypointMatch> match_features(std::span<const Feature> from, std::span<const Feature> to,
                                          const MatchOptions& opts = {});

// Matches sorted by descending score; src in frame, dst in reference.
// Throws NoKeypoints when either image yields no features.
std::vector<KeypointMatch> detect_and_match(const GrayImage& frame, const GrayImage& reference,
                                            const FeatureExtractor& extractor,
                                            const MatchOptions& opts = {});
std::vector<KeypointMatch> detect_and_match(const GrayImage& frame, const GrayImage& reference);

struct RansacOptions {
  int iterations = 2000;
  double inlier_px = 3.0;
  std::uint64_t seed = 0;
};

// Normalized direct linear transform over all matches (no robustness).
Homography fit_homography_dlt(std::span<const KeypointMatch> matches);

Homography estimate_homography(std::span<const KeypointMatch> matches, const RansacOptions& ransac = {});

std::vector<PhotoGazePoint> remap_gaze(std::span<const ScreenGazePoint> points, const Homography& screen_to_photo,
                                       Size2 photo_size);

// Registers a frame sequence to one reference photo. A frame whose features
// moved less than `reuse_motion_px` (median) from the previous frame reuses
// the previous homography.
class FrameRegistrar {
 public:
  FrameRegistrar(GrayImage reference, std::shared_ptr<const FeatureExtractor> extractor, RansacOptions ransac,
                 double reuse_motion_px = 1.0);

  Homography register_frame(const GrayImage& frame);
  int reused_count() const { return reused_; }

 private:
  std::shared_ptr<const FeatureExtractor> extractor_;
  std::vector<Feature> reference_features_;
  RansacOptions ransac_;
  double reuse_motion_px_;
  std::vector<Feature> previous_features_;
  std::optional<Homography> previous_;
  int reused_ = 0;
};

// Seed derived from a session id (FNV-1a), for deterministic replays.
std::uint64_t seed_from_session_id(const std::string& session_id);

}  // namespace e2r
