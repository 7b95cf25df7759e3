#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "e2r/gaze.hpp"

namespace e2r {

inline constexpr std::int64_t kMinFixationUs = 300'000;
inline constexpr double kSaccadeVelocityDegS = 20.0;

struct FixationEvent {
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;
  Point2 centroid_xy;
  double dispersion_px = 0.0;  // max member distance to the centroid
  int sample_count = 0;

  std::int64_t duration_us() const { return end_us - start_us; }
};

struct SaccadeEvent {
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;
  double amplitude_deg = 0.0;
  double peak_velocity_deg_s = 0.0;
};

struct GazeMetrics {
  double fixation_ratio_pct = 0.0;
  double saccade_frequency_hz = 0.0;
  double total_duration_s = 0.0;
};

double median(std::vector<double> values);

// median(d) + 1.5 * MAD(d) over consecutive-sample distances d of valid,
// contiguous pairs. Throws TooFewSamples below 3 samples.
double dispersion_threshold(const GazeStream& stream);
double dispersion_threshold(std::span<const double> distances);

// Greedy centroid-dispersion grouping. Off-screen samples and blink gaps
// close the running group.
std::vector<FixationEvent> detect_fixations(const GazeStream& stream, double threshold_px,
                                            std::int64_t min_duration_us = kMinFixationUs);

// Maximal runs of consecutive pairs whose angular velocity exceeds the
// threshold become one event.
std::vector<SaccadeEvent> detect_saccades(const GazeStream& stream, const ViewingGeometry& geometry,
                                          double velocity_threshold_deg_s = kSaccadeVelocityDegS);

GazeMetrics compute_metrics(std::span<const FixationEvent> fixations, std::span<const SaccadeEvent> saccades,
                            const GazeStream& stream);

// One analysed photo for one participant.
struct MetricsRow {
  std::string participant;
  int theme_index = 0;  // 0..4 for themes i..v
  GazeMetrics metrics;
};

// Table with one block per participant (two sub-rows: fixation ratio and
// saccade frequency), columns i..v and AVG, plus a closing AVG block.
// Empty cells mark themes without data; AVG averages the present cells.
std::string metrics_table_csv(std::span<const MetricsRow> rows);

// Inverse of metrics_table_csv, skipping the AVG block.
std::vector<MetricsRow> parse_metrics_table_csv(std::string_view text);

}  // namespace e2r
