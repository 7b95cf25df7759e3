#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "e2r/gaze.hpp"

namespace e2r {

struct CalibrationPair {
  Point2 pupil_xy;
  Point2 target_xy;
};

// Bivariate polynomial pupil -> screen map. Monomials are ordered by total
// degree, then by descending power of x: 1, x, y, x^2, xy, y^2, x^3, ...
// Pupil coordinates are shifted and scaled by (norm_center, norm_scale)
// before evaluation; a hand-built model can leave them at 0 / 1.
struct CalibrationModel {
  int degree = 1;
  std::vector<double> coeffs_x;
  std::vector<double> coeffs_y;
  Point2 norm_center{0.0, 0.0};
  double norm_scale = 1.0;
  double residual_rmse_px = 0.0;
  int n_points = 0;
};

inline constexpr int monomial_count(int degree) { return (degree + 1) * (degree + 2) / 2; }

std::vector<double> monomials(Point2 p, int degree);

// Least-squares fit per axis. Throws InsufficientPoints or DegenerateGeometry.
CalibrationModel fit_calibration(std::span<const CalibrationPair> pairs, int degree = 2);

Point2 evaluate(const CalibrationModel& model, Point2 pupil_xy);

// Maps an eye-camera sample to the display. Off-screen results are clamped
// and flagged invalid.
ScreenGazePoint apply_calibration(const CalibrationModel& model, const GazeSample& sample,
                                  const ViewingGeometry& geometry = {});

// Sessions whose residual exceeds max_fraction * screen width are rejected.
bool passes_quality_gate(const CalibrationModel& model, const ViewingGeometry& geometry,
                         double max_fraction = 0.02);

// CSV with header `pupil_x,pupil_y,target_x,target_y`.
std::vector<CalibrationPair> parse_calibration_csv(std::string_view text);

// Line-delimited eye-camera records `{t_us, pupil_x, pupil_y, conf, eye?, frame?}`.
// Throws MalformedRecord naming the line.
std::vector<GazeSample> parse_raw_samples(std::string_view text);

std::string to_json(const CalibrationModel& model);
CalibrationModel calibration_from_json(std::string_view text);

}  // namespace e2r
