#include "e2r/pipeline.hpp"

#include <algorithm>

#include "e2r/error.hpp"
#include "e2r/fsutil.hpp"
#include "e2r/image.hpp"

namespace e2r {

Homography display_homography(Size2 screen, Size2 photo) {
  if (screen.width <= 0 || screen.height <= 0 || photo.width <= 0 || photo.height <= 0) {
    throw Error(ErrorCode::InvalidArgument, "display and photo sizes must be positive");
  }
  const double s = std::min(static_cast<double>(screen.width) / photo.width,
                            static_cast<double>(screen.height) / photo.height);
  const double ox = (screen.width - s * photo.width) / 2.0;
  const double oy = (screen.height - s * photo.height) / 2.0;
  // Screen -> photo, the inverse of scale-then-offset.
  Homography h;
  h.h = {1.0 / s, 0.0, -ox / s, 0.0, 1.0 / s, -oy / s, 0.0, 0.0, 1.0};
  return h;
}

std::map<std::int64_t, Homography> register_scene_frames(const std::map<std::int64_t, std::filesystem::path>& frames,
                                                         const GrayImage& photo, const RansacOptions& ransac) {
  FrameRegistrar registrar(photo, std::make_shared<CornerPatchExtractor>(), ransac);
  std::map<std::int64_t, Homography> out;
  for (const auto& [index, path] : frames) {
    try {
      out.emplace(index, registrar.register_frame(load_gray(path)));
    } catch (const Error& e) {
      // Unregistrable frames drop their gaze points rather than the whole trace.
      if (e.code() != ErrorCode::NoKeypoints && e.code() != ErrorCode::InsufficientMatches &&
          e.code() != ErrorCode::NoConsensus) {
        throw;
      }
    }
  }
  return out;
}

AnalysisResult analyze_gaze(std::string_view gaze_jsonl, const PhotoRecord& photo, const Config& config,
                            const GazeRemap& remap) {
  const auto& a = config.analysis;
  AnalysisResult r;
  const auto raw = ingest_stream(gaze_jsonl, config.geometry);
  r.cleaned = remove_blinks(raw, a.conf_threshold);
  const auto& stream = r.cleaned.stream;
  r.dispersion_threshold_px = dispersion_threshold(stream);
  r.fixations = detect_fixations(stream, r.dispersion_threshold_px, a.min_fixation_us);
  r.saccades = detect_saccades(stream, config.geometry, a.saccade_velocity_deg_s);
  r.metrics = compute_metrics(r.fixations, r.saccades, stream);

  const auto fallback = remap.fixed ? *remap.fixed : display_homography(config.geometry.screen_size(), photo.size);
  r.photo_points.reserve(stream.size());
  for (const auto& s : stream.samples) {
    const Homography* h = &fallback;
    if (!remap.per_frame.empty()) {
      const auto it = s.frame ? remap.per_frame.find(*s.frame) : remap.per_frame.end();
      if (it != remap.per_frame.end()) {
        h = &it->second;
      } else if (!remap.fixed) {
        r.photo_points.push_back({s.timestamp_us, {}, false});
        continue;
      }
    }
    auto mapped = remap_gaze(std::span(&s, 1), *h, photo.size);
    r.photo_points.push_back(mapped.front());
  }

  const auto params = KdeParams::for_photo(photo.size, a.bandwidth_fraction, a.max_grid_cells);
  r.heatmap = kde_heatmap(r.photo_points, params, photo.photo_id, photo.size, {a.kde_threads, false});
  r.rois = extract_rois(r.heatmap, photo, a.roi);
  if (!r.rois.empty()) r.focus = focus_index(r.rois);
  return r;
}

ArtifactPaths write_artifacts(const AnalysisResult& result, const PhotoRecord& photo, const std::string& participant,
                              const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ArtifactPaths paths;
  const auto stem = photo.photo_id;
  paths.metrics_csv = dir / (stem + ".metrics.csv");
  paths.heatmap_png = dir / (stem + ".png");
  paths.heatmap_json = dir / (stem + ".json");
  paths.rois_json = dir / (stem + ".rois.json");

  const MetricsRow row{participant, static_cast<int>(photo.theme), result.metrics};
  write_atomic(paths.metrics_csv, metrics_table_csv(std::span(&row, 1)));
  const auto png = render_heatmap(result.heatmap);
  write_file_bytes(paths.heatmap_png, png);
  write_atomic(paths.heatmap_json, heatmap_sidecar_json(result.heatmap));
  write_atomic(paths.rois_json, rois_json(result.rois));

  // Overlay only for photos we can decode (PNG, PGM).
  std::error_code ec;
  if (std::filesystem::is_regular_file(photo.image_path, ec)) {
    std::optional<RgbImage> rgb;
    try {
      rgb = load_rgb(photo.image_path);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MalformedRecord) throw;
    }
    if (rgb) {
      paths.overlay_png = dir / (stem + ".overlay.png");
      write_file_bytes(*paths.overlay_png, render_heatmap(result.heatmap, &*rgb));
    }
  }
  return paths;
}

}  // namespace e2r
