#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "e2r/geometry.hpp"

namespace e2r {

enum class Eye { Left, Right, Merged };

// Raw eye-camera observation (640x480 nominal).
struct GazeSample {
  std::int64_t timestamp_us = 0;
  Eye eye = Eye::Merged;
  Point2 pupil_xy;
  double confidence = 1.0;
  std::optional<std::int64_t> scene_frame_index;
};

inline constexpr Size2 kEyeCameraSize{640, 480};

// Gaze on the display. Confidence and scene frame travel with the point so
// blink removal and per-frame remapping can run after calibration.
struct ScreenGazePoint {
  std::int64_t timestamp_us = 0;
  Point2 screen_xy;
  bool valid = true;
  double confidence = 1.0;
  std::optional<std::int64_t> frame;
};

struct ViewingGeometry {
  int screen_width_px = 5120;
  int screen_height_px = 1536;
  double screen_width_mm = 3000.0;
  double viewing_distance_mm = 1500.0;

  // Throws InvalidArgument unless every field is strictly positive.
  void validate() const;
  double mm_per_px() const { return screen_width_mm / screen_width_px; }
  Size2 screen_size() const { return {screen_width_px, screen_height_px}; }
  // Visual angle in degrees subtended by a displacement of `px` pixels.
  double visual_angle_deg(double px) const;
};

struct TimeSpan {
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;

  friend bool operator==(const TimeSpan&, const TimeSpan&) = default;
};

struct GazeStream {
  std::vector<ScreenGazePoint> samples;
  double sample_rate_hz = 0.0;
  std::int64_t duration_us = 0;
  // Spans of removed samples, sorted. A consecutive pair of retained samples
  // that straddles a gap does not contribute to valid time or velocities.
  std::vector<TimeSpan> gaps;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

// Rebuilds duration and rate from the sample list.
void refresh_stream_stats(GazeStream& stream);

// True when samples i and i+1 are adjacent in valid time (no removed span between).
bool contiguous_pair(const GazeStream& stream, std::size_t i);

// Sum of inter-sample intervals over contiguous pairs.
std::int64_t valid_duration_us(const GazeStream& stream);

// Validates line-delimited records in file order without sorting or
// deduplicating. Throws MalformedRecord naming the line.
std::vector<ScreenGazePoint> parse_gaze_records(std::string_view raw, const ViewingGeometry& geometry);

// Parses line-delimited gaze records `{t_us, x, y, conf, frame}`. Records are
// ordered by timestamp; duplicates keep the higher-confidence record.
GazeStream ingest_stream(std::string_view raw, const ViewingGeometry& geometry);

struct BlinkRemoval {
  GazeStream stream;
  std::vector<TimeSpan> removed_spans;
  std::size_t removed_count = 0;
};

BlinkRemoval remove_blinks(const GazeStream& stream, double conf_threshold = 0.6);

// One record per line, LF-terminated.
std::string to_jsonl(const GazeStream& stream);
std::string to_jsonl_record(const ScreenGazePoint& point);

}  // namespace e2r
