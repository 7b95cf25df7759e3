#include "e2r/attention_map.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include <json.hpp>

#include "e2r/error.hpp"

namespace e2r {

KdeParams KdeParams::for_photo(Size2 photo, double bandwidth_fraction, int max_cells) {
  if (photo.width <= 0 || photo.height <= 0) throw Error(ErrorCode::InvalidArgument, "photo size must be positive");
  if (!(bandwidth_fraction > 0.0) || max_cells < 1) throw Error(ErrorCode::InvalidArgument, "bad KDE parameters");
  KdeParams p;
  p.bandwidth_px = bandwidth_fraction * photo.width;
  const int long_side = std::max(photo.width, photo.height);
  if (long_side <= max_cells) {
    p.grid_w = photo.width;
    p.grid_h = photo.height;
  } else {
    const double s = static_cast<double>(max_cells) / long_side;
    p.grid_w = std::max(1, static_cast<int>(std::lround(photo.width * s)));
    p.grid_h = std::max(1, static_cast<int>(std::lround(photo.height * s)));
  }
  return p;
}

double AttentionHeatmap::integral() const {
  double sum = 0.0;
  for (double v : grid) sum += v;
  return sum * cell_area();
}

std::vector<double> AttentionHeatmap::normalized() const {
  const double total = integral();
  std::vector<double> out = grid;
  if (total > 0.0) {
    for (auto& v : out) v /= total;
  }
  return out;
}

namespace {

void evaluate_rows(std::vector<double>& grid, int row_begin, int row_end, int grid_w,
                   std::span<const Point2> pts, const std::vector<double>& ex, const std::vector<double>& ey,
                   int grid_h) {
  for (int j = row_begin; j < row_end; ++j) {
    double* row = &grid[static_cast<std::size_t>(j) * grid_w];
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const double wy = ey[k * grid_h + j];
      const double* wx = &ex[k * grid_w];
      for (int i = 0; i < grid_w; ++i) row[i] += wy * wx[i];
    }
  }
}

void evaluate_rows_direct(std::vector<double>& grid, int row_begin, int row_end, const AttentionHeatmap& hm,
                          std::span<const Point2> pts, double inv_two_h2) {
  const int grid_w = hm.params.grid_w;
  for (int j = row_begin; j < row_end; ++j) {
    for (int i = 0; i < grid_w; ++i) {
      const Point2 c = hm.cell_center(i, j);
      double acc = 0.0;
      for (const auto& p : pts) {
        const double dx = c.x - p.x, dy = c.y - p.y;
        acc += std::exp(-(dx * dx + dy * dy) * inv_two_h2);
      }
      grid[static_cast<std::size_t>(j) * grid_w + i] = acc;
    }
  }
}

}  // namespace

AttentionHeatmap kde_heatmap(std::span<const PhotoGazePoint> points, const KdeParams& params,
                             const std::string& photo_id, Size2 photo_size, const KdeOptions& opts) {
  if (!(params.bandwidth_px > 0.0) || params.grid_w <= 0 || params.grid_h <= 0) {
    throw Error(ErrorCode::InvalidArgument, "KDE needs bandwidth > 0 and a non-empty grid");
  }
  if (photo_size.width <= 0 || photo_size.height <= 0) throw Error(ErrorCode::InvalidArgument, "empty photo");

  std::vector<Point2> pts;
  for (const auto& p : points) {
    if (p.in_bounds && photo_size.contains(p.photo_xy)) pts.push_back(p.photo_xy);
  }
  if (pts.empty()) throw Error(ErrorCode::NoInBoundsPoints, "no in-bounds gaze points for photo '" + photo_id + "'");

  AttentionHeatmap hm;
  hm.params = params;
  hm.photo_id = photo_id;
  hm.photo_size = photo_size;
  hm.n_samples = static_cast<std::int64_t>(pts.size());
  hm.grid.assign(static_cast<std::size_t>(params.grid_w) * params.grid_h, 0.0);

  const double h = params.bandwidth_px;
  const double inv_two_h2 = 1.0 / (2.0 * h * h);
  const int gw = params.grid_w, gh = params.grid_h;
  const int threads = std::clamp(opts.threads, 1, gh);

  std::vector<double> ex, ey;
  if (!opts.direct) {
    ex.resize(pts.size() * gw);
    ey.resize(pts.size() * gh);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      for (int i = 0; i < gw; ++i) {
        const double dx = hm.cell_center(i, 0).x - pts[k].x;
        ex[k * gw + i] = std::exp(-dx * dx * inv_two_h2);
      }
      for (int j = 0; j < gh; ++j) {
        const double dy = hm.cell_center(0, j).y - pts[k].y;
        ey[k * gh + j] = std::exp(-dy * dy * inv_two_h2);
      }
    }
  }

  auto work = [&](int begin, int end) {
    if (opts.direct) {
      evaluate_rows_direct(hm.grid, begin, end, hm, pts, inv_two_h2);
    } else {
      evaluate_rows(hm.grid, begin, end, gw, pts, ex, ey, gh);
    }
  };
  if (threads == 1) {
    work(0, gh);
  } else {
    std::vector<std::jthread> pool;
    const int chunk = (gh + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int b = t * chunk, e = std::min(gh, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }

  // 1 / (n h^2) * 1 / (2 pi)
  const double scale = 1.0 / (static_cast<double>(pts.size()) * h * h * 2.0 * std::numbers::pi);
  for (auto& v : hm.grid) v *= scale;
  return hm;
}

AttentionHeatmap merge_heatmaps(const AttentionHeatmap& a, const AttentionHeatmap& b) {
  if (!(a.params == b.params)) throw Error(ErrorCode::ParamMismatch, "KDE parameters differ");
  if (a.photo_id != b.photo_id || !(a.photo_size == b.photo_size)) {
    throw Error(ErrorCode::ParamMismatch, "heatmaps belong to different photos");
  }
  if (a.grid.size() != b.grid.size()) throw Error(ErrorCode::ParamMismatch, "grid sizes differ");
  const auto n = a.n_samples + b.n_samples;
  if (b.n_samples == 0) return a;
  if (a.n_samples == 0) return b;
  AttentionHeatmap out = a;
  out.n_samples = n;
  const double wa = static_cast<double>(a.n_samples), wb = static_cast<double>(b.n_samples);
  for (std::size_t k = 0; k < out.grid.size(); ++k) out.grid[k] = (wa * a.grid[k] + wb * b.grid[k]) / (wa + wb);
  return out;
}

Rgb color_ramp(double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  static constexpr Rgb kStops[5] = {{0, 0, 255}, {0, 255, 255}, {0, 255, 0}, {255, 255, 0}, {255, 0, 0}};
  const double pos = t * 4.0;
  const int k = std::min(3, static_cast<int>(pos));
  const double f = pos - k;
  auto mix = [f](std::uint8_t a, std::uint8_t b) {
    return static_cast<std::uint8_t>(std::lround(a + (static_cast<double>(b) - a) * f));
  };
  return {mix(kStops[k].r, kStops[k + 1].r), mix(kStops[k].g, kStops[k + 1].g), mix(kStops[k].b, kStops[k + 1].b)};
}

RgbImage render_heatmap_image(const AttentionHeatmap& heatmap, const RgbImage* overlay) {
  const int gw = heatmap.params.grid_w, gh = heatmap.params.grid_h;
  if (heatmap.grid.size() != static_cast<std::size_t>(gw) * gh) {
    throw Error(ErrorCode::InvalidArgument, "grid size does not match params");
  }
  const auto [mn, mx] = std::minmax_element(heatmap.grid.begin(), heatmap.grid.end());
  const double lo = *mn, span = *mx - *mn;
  auto color_at = [&](int i, int j) {
    const double v = heatmap.at(i, j);
    return color_ramp(span > 0.0 ? (v - lo) / span : 0.5);
  };

  if (!overlay) {
    RgbImage img(gw, gh);
    for (int j = 0; j < gh; ++j) {
      for (int i = 0; i < gw; ++i) {
        const Rgb c = color_at(i, j);
        auto* p = img.px(i, j);
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
      }
    }
    return img;
  }

  RgbImage img = *overlay;
  for (int y = 0; y < img.height; ++y) {
    const int j = std::min(gh - 1, static_cast<int>(static_cast<std::int64_t>(y) * gh / img.height));
    for (int x = 0; x < img.width; ++x) {
      const int i = std::min(gw - 1, static_cast<int>(static_cast<std::int64_t>(x) * gw / img.width));
      const Rgb c = color_at(i, j);
      auto* p = img.px(x, y);
      p[0] = static_cast<std::uint8_t>((p[0] + c.r + 1) / 2);
      p[1] = static_cast<std::uint8_t>((p[1] + c.g + 1) / 2);
      p[2] = static_cast<std::uint8_t>((p[2] + c.b + 1) / 2);
    }
  }
  return img;
}

std::vector<std::uint8_t> render_heatmap(const AttentionHeatmap& heatmap, const RgbImage* overlay) {
  for (double v : heatmap.grid) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "heatmap grid contains non-finite values");
  }
  return encode_png(render_heatmap_image(heatmap, overlay));
}

std::vector<RegionOfInterest> extract_rois(const AttentionHeatmap& heatmap, const PhotoRecord& photo,
                                           const RoiOptions& opts) {
  const int gw = heatmap.params.grid_w, gh = heatmap.params.grid_h;
  const double mx = heatmap.grid.empty() ? 0.0 : *std::max_element(heatmap.grid.begin(), heatmap.grid.end());
  if (!(mx > 0.0)) throw Error(ErrorCode::DegenerateHeatmap, "heatmap maximum is not positive");

  const auto density = heatmap.normalized();
  const double threshold = opts.rel_threshold * mx;
  const double cw = heatmap.cell_width(), ch = heatmap.cell_height(), area = heatmap.cell_area();

  struct Component {
    RegionOfInterest roi;
    std::size_t first_cell = 0;
  };
  std::vector<Component> comps;
  std::vector<char> seen(heatmap.grid.size(), 0);
  std::vector<std::size_t> stack;

  for (std::size_t start = 0; start < heatmap.grid.size(); ++start) {
    if (seen[start] || heatmap.grid[start] < threshold) continue;
    Component c;
    c.first_cell = start;
    int i0 = gw, j0 = gh, i1 = -1, j1 = -1;
    double mass = 0.0, wx = 0.0, wy = 0.0;
    int cells = 0;
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const auto cur = stack.back();
      stack.pop_back();
      const int i = static_cast<int>(cur % gw), j = static_cast<int>(cur / gw);
      ++cells;
      i0 = std::min(i0, i);
      i1 = std::max(i1, i);
      j0 = std::min(j0, j);
      j1 = std::max(j1, j);
      const double m = density[cur] * area;
      const Point2 ctr = heatmap.cell_center(i, j);
      mass += m;
      wx += m * ctr.x;
      wy += m * ctr.y;
      for (int dj = -1; dj <= 1; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          const int ni = i + di, nj = j + dj;
          if (ni < 0 || nj < 0 || ni >= gw || nj >= gh) continue;
          const auto nk = static_cast<std::size_t>(nj) * gw + ni;
          if (seen[nk] || heatmap.grid[nk] < threshold) continue;
          seen[nk] = 1;
          stack.push_back(nk);
        }
      }
    }
    if (cells < opts.min_area_cells) continue;
    c.roi.bbox = {i0 * cw, j0 * ch, (i1 + 1) * cw, (j1 + 1) * ch};
    c.roi.mass = mass;
    c.roi.area_cells = cells;
    c.roi.centroid_xy = mass > 0 ? Point2{wx / mass, wy / mass} : heatmap.cell_center(i0, j0);
    double best = 0.0;
    for (const auto& region : photo.annotated_regions) {
      const double ov = polygon_rect_overlap(region.polygon, c.roi.bbox);
      if (ov > best) {
        best = ov;
        c.roi.label = region.label;
      }
    }
    comps.push_back(std::move(c));
  }

  std::sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) {
    if (a.roi.mass != b.roi.mass) return a.roi.mass > b.roi.mass;
    if (a.roi.area_cells != b.roi.area_cells) return a.roi.area_cells < b.roi.area_cells;
    return a.first_cell < b.first_cell;
  });
  std::vector<RegionOfInterest> out;
  for (std::size_t k = 0; k < comps.size() && static_cast<int>(k) < opts.max_k; ++k) {
    out.push_back(comps[k].roi);
    out.back().rank = static_cast<int>(k) + 1;
  }
  return out;
}

double focus_index(std::span<const RegionOfInterest> rois) {
  if (rois.empty()) throw Error(ErrorCode::InvalidArgument, "focus index needs at least one ROI");
  double total = 0.0, top = 0.0;
  for (const auto& r : rois) {
    total += r.mass;
    if (r.rank == 1) top = r.mass;
  }
  if (top == 0.0) top = rois.front().mass;
  return total > 0.0 ? top / total : 0.0;
}

std::string heatmap_sidecar_json(const AttentionHeatmap& heatmap) {
  nlohmann::json j = {{"photo_id", heatmap.photo_id},
                      {"bandwidth_px", heatmap.params.bandwidth_px},
                      {"grid_w", heatmap.params.grid_w},
                      {"grid_h", heatmap.params.grid_h},
                      {"kernel", "gaussian"},
                      {"n_samples", heatmap.n_samples},
                      {"photo_w", heatmap.photo_size.width},
                      {"photo_h", heatmap.photo_size.height},
                      {"min_density", *std::min_element(heatmap.grid.begin(), heatmap.grid.end())},
                      {"max_density", *std::max_element(heatmap.grid.begin(), heatmap.grid.end())}};
  return j.dump(2) + "\n";
}

std::string rois_json(std::span<const RegionOfInterest> rois) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : rois) {
    list.push_back({{"rank", r.rank},
                    {"label", r.label ? nlohmann::json(*r.label) : nlohmann::json(nullptr)},
                    {"mass", r.mass},
                    {"area_cells", r.area_cells},
                    {"centroid", {r.centroid_xy.x, r.centroid_xy.y}},
                    {"bbox", {r.bbox.x0, r.bbox.y0, r.bbox.x1, r.bbox.y1}}});
  }
  return list.dump(2) + "\n";
}

}  // namespace e2r
