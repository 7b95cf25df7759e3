#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "e2r/attention_map.hpp"
#include "e2r/config.hpp"
#include "e2r/oculomotor.hpp"
#include "e2r/photo_library.hpp"
#include "e2r/scene_align.hpp"

namespace e2r {

// Photo shown centred on the screen at the largest aspect-preserving size.
Homography display_homography(Size2 screen, Size2 photo);

// How gaze coordinates reach photo pixels. Points whose frame has an entry in
// `per_frame` use it, the rest use `fixed`, and without either the photo is
// assumed displayed via display_homography.
struct GazeRemap {
  std::optional<Homography> fixed;
  std::map<std::int64_t, Homography> per_frame;

  static GazeRemap identity() { return {Homography::identity(), {}}; }
};

// Registers each scene frame to the photo (frame index -> homography).
std::map<std::int64_t, Homography> register_scene_frames(const std::map<std::int64_t, std::filesystem::path>& frames,
                                                         const GrayImage& photo, const RansacOptions& ransac);

struct AnalysisResult {
  BlinkRemoval cleaned;
  double dispersion_threshold_px = 0.0;
  std::vector<FixationEvent> fixations;
  std::vector<SaccadeEvent> saccades;
  GazeMetrics metrics;
  std::vector<PhotoGazePoint> photo_points;
  AttentionHeatmap heatmap;
  std::vector<RegionOfInterest> rois;
  std::optional<double> focus;  // absent when no ROI survived
};

// ingest -> blink removal -> fixations/saccades/metrics on screen
// coordinates -> remap -> KDE -> ROIs.
AnalysisResult analyze_gaze(std::string_view gaze_jsonl, const PhotoRecord& photo, const Config& config,
                            const GazeRemap& remap = {});

struct ArtifactPaths {
  std::filesystem::path metrics_csv;
  std::filesystem::path heatmap_png;
  std::filesystem::path heatmap_json;
  std::filesystem::path rois_json;
  std::optional<std::filesystem::path> overlay_png;  // written when the photo is readable
};

// Writes <stem>.metrics.csv, <stem>.png, <stem>.json, <stem>.rois.json and
// <stem>.overlay.png under `dir`, where stem is the photo id.
ArtifactPaths write_artifacts(const AnalysisResult& result, const PhotoRecord& photo, const std::string& participant,
                              const std::filesystem::path& dir);

}  // namespace e2r
