#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "e2r/image.hpp"
#include "e2r/photo_library.hpp"
#include "e2r/scene_align.hpp"

namespace e2r {

enum class Kernel { Gaussian };

inline constexpr double kDefaultBandwidthFraction = 0.05;
inline constexpr int kMaxGridCells = 512;

struct KdeParams {
  double bandwidth_px = 0.0;
  int grid_w = 0;
  int grid_h = 0;
  Kernel kernel = Kernel::Gaussian;

  // Bandwidth = 5% of the photo width by default; grid follows the photo
  // aspect with the long side capped at max_cells.
  static KdeParams for_photo(Size2 photo, double bandwidth_fraction = kDefaultBandwidthFraction,
                             int max_cells = kMaxGridCells);

  friend bool operator==(const KdeParams&, const KdeParams&) = default;
};

// Densities are per square photo pixel. Cell (i, j) covers
// [i*cw, (i+1)*cw) x [j*ch, (j+1)*ch) and is evaluated at its centre.
struct AttentionHeatmap {
  std::vector<double> grid;  // row-major, grid_h rows of grid_w
  std::int64_t n_samples = 0;
  KdeParams params;
  std::string photo_id;
  Size2 photo_size;

  double cell_width() const { return static_cast<double>(photo_size.width) / params.grid_w; }
  double cell_height() const { return static_cast<double>(photo_size.height) / params.grid_h; }
  double cell_area() const { return cell_width() * cell_height(); }
  Point2 cell_center(int i, int j) const { return {(i + 0.5) * cell_width(), (j + 0.5) * cell_height()}; }
  double at(int i, int j) const { return grid[static_cast<std::size_t>(j) * params.grid_w + i]; }

  // Riemann sum of density * cell area.
  double integral() const;
  // Scaled so integral() == 1; all-zero grids are returned unchanged.
  std::vector<double> normalized() const;
};

struct KdeOptions {
  int threads = 1;
  // Evaluate exp(-r^2/2h^2) per cell instead of the separable product.
  bool direct = false;
};

// Gaussian KDE of the in-bounds points. Throws NoInBoundsPoints.
AttentionHeatmap kde_heatmap(std::span<const PhotoGazePoint> points, const KdeParams& params,
                             const std::string& photo_id, Size2 photo_size, const KdeOptions& opts = {});

// (n_a * a + n_b * b) / (n_a + n_b). Throws ParamMismatch.
AttentionHeatmap merge_heatmaps(const AttentionHeatmap& a, const AttentionHeatmap& b);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Blue -> cyan -> green -> yellow -> red over t in [0, 1].
Rgb color_ramp(double t);

// Min-max normalized ramp at grid resolution, or at overlay resolution
// alpha-composited 50/50 over the photo.
RgbImage render_heatmap_image(const AttentionHeatmap& heatmap, const RgbImage* overlay = nullptr);
std::vector<std::uint8_t> render_heatmap(const AttentionHeatmap& heatmap, const RgbImage* overlay = nullptr);

struct RegionOfInterest {
  Rect bbox;
  Point2 centroid_xy;
  double mass = 0.0;  // share of the normalized density
  int rank = 0;
  int area_cells = 0;
  std::optional<std::string> label;
};

struct RoiOptions {
  double rel_threshold = 0.6;
  int max_k = 5;
  int min_area_cells = 4;
};

// Thresholded 8-connected components ranked by mass (desc), then smaller
// area, then first cell in row-major order. Throws DegenerateHeatmap.
std::vector<RegionOfInterest> extract_rois(const AttentionHeatmap& heatmap, const PhotoRecord& photo,
                                           const RoiOptions& opts = {});

// Mass of the rank-1 ROI over total ROI mass.
double focus_index(std::span<const RegionOfInterest> rois);

std::string heatmap_sidecar_json(const AttentionHeatmap& heatmap);
std::string rois_json(std::span<const RegionOfInterest> rois);

}  // namespace e2r
