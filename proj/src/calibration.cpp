#include "e2r/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "e2r/error.hpp"

namespace e2r {

std::vector<double> monomials(Point2 p, int degree) {
  std::vector<double> out;
  out.reserve(monomial_count(degree));
  for (int d = 0; d <= degree; ++d) {
    for (int py = 0; py <= d; ++py) {
      const int px = d - py;
      out.push_back(std::pow(p.x, px) * std::pow(p.y, py));
    }
  }
  return out;
}

namespace {

Point2 normalize(const CalibrationModel& m, Point2 p) {
  return {(p.x - m.norm_center.x) / m.norm_scale, (p.y - m.norm_center.y) / m.norm_scale};
}

}  // namespace

CalibrationModel fit_calibration(std::span<const CalibrationPair> pairs, int degree) {
  if (degree < 1) throw Error(ErrorCode::InvalidArgument, "degree must be >= 1");
  const int m = monomial_count(degree);
  const auto n = static_cast<int>(pairs.size());
  if (n < m) {
    throw Error(ErrorCode::InsufficientPoints,
                std::to_string(n) + " pairs for " + std::to_string(m) + " coefficients");
  }

  CalibrationModel model;
  model.degree = degree;
  model.n_points = n;
  Point2 mean;
  for (const auto& p : pairs) {
    mean.x += p.pupil_xy.x;
    mean.y += p.pupil_xy.y;
  }
  mean.x /= n;
  mean.y /= n;
  double scale = 0.0;
  for (const auto& p : pairs) {
    scale = std::max({scale, std::abs(p.pupil_xy.x - mean.x), std::abs(p.pupil_xy.y - mean.y)});
  }
  if (scale == 0.0) throw Error(ErrorCode::DegenerateGeometry, "all pupil positions coincide");
  model.norm_center = mean;
  model.norm_scale = scale;

  Eigen::MatrixXd design(n, m);
  Eigen::MatrixXd targets(n, 2);
  for (int i = 0; i < n; ++i) {
    const auto row = monomials(normalize(model, pairs[i].pupil_xy), degree);
    for (int k = 0; k < m; ++k) design(i, k) = row[k];
    targets(i, 0) = pairs[i].target_xy.x;
    targets(i, 1) = pairs[i].target_xy.y;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < m) {
    throw Error(ErrorCode::DegenerateGeometry,
                "design matrix rank " + std::to_string(qr.rank()) + " < " + std::to_string(m));
  }
  const Eigen::MatrixXd coeffs = qr.solve(targets);
  model.coeffs_x.assign(coeffs.col(0).data(), coeffs.col(0).data() + m);
  model.coeffs_y.assign(coeffs.col(1).data(), coeffs.col(1).data() + m);

  const Eigen::MatrixXd residual = design * coeffs - targets;
  model.residual_rmse_px = std::sqrt(residual.squaredNorm() / n);
  return model;
}

Point2 evaluate(const CalibrationModel& model, Point2 pupil_xy) {
  const auto row = monomials(normalize(model, pupil_xy), model.degree);
  Point2 out;
  for (std::size_t k = 0; k < row.size(); ++k) {
    out.x += model.coeffs_x[k] * row[k];
    out.y += model.coeffs_y[k] * row[k];
  }
  return out;
}

ScreenGazePoint apply_calibration(const CalibrationModel& model, const GazeSample& sample,
                                  const ViewingGeometry& geometry) {
  ScreenGazePoint out;
  out.timestamp_us = sample.timestamp_us;
  out.confidence = sample.confidence;
  out.frame = sample.scene_frame_index;
  const Point2 p = evaluate(model, sample.pupil_xy);
  out.valid = geometry.screen_size().contains(p);
  out.screen_xy = {std::clamp(p.x, 0.0, geometry.screen_width_px - 1.0),
                   std::clamp(p.y, 0.0, geometry.screen_height_px - 1.0)};
  return out;
}

bool passes_quality_gate(const CalibrationModel& model, const ViewingGeometry& geometry,
                         double max_fraction) {
  return model.residual_rmse_px <= max_fraction * geometry.screen_width_px;
}

std::vector<CalibrationPair> parse_calibration_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::vector<CalibrationPair> pairs;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "pupil_x,pupil_y,target_x,target_y") {
        throw Error(ErrorCode::MalformedRecord, "line 1: expected header pupil_x,pupil_y,target_x,target_y");
      }
      header = true;
      continue;
    }
    double v[4];
    const char* cur = line.c_str();
    for (int k = 0; k < 4; ++k) {
      char* end = nullptr;
      v[k] = std::strtod(cur, &end);
      const char expected = k < 3 ? ',' : '\0';
      if (end == cur || *end != expected) {
        throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": expected 4 numbers");
      }
      cur = end + (k < 3 ? 1 : 0);
    }
    pairs.push_back({{v[0], v[1]}, {v[2], v[3]}});
  }
  if (!header) throw Error(ErrorCode::MalformedRecord, "missing header");
  return pairs;
}

std::string to_json(const CalibrationModel& model) {
  nlohmann::json j = {
      {"degree", model.degree},
      {"coeffs_x", model.coeffs_x},
      {"coeffs_y", model.coeffs_y},
      {"norm_center", {model.norm_center.x, model.norm_center.y}},
      {"norm_scale", model.norm_scale},
      {"residual_rmse_px", model.residual_rmse_px},
      {"n_points", model.n_points},
  };
  return j.dump(2) + "\n";
}

CalibrationModel calibration_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    CalibrationModel m;
    m.degree = j.at("degree").get<int>();
    m.coeffs_x = j.at("coeffs_x").get<std::vector<double>>();
    m.coeffs_y = j.at("coeffs_y").get<std::vector<double>>();
    const auto c = j.value("norm_center", std::vector<double>{0.0, 0.0});
    m.norm_center = {c.at(0), c.at(1)};
    m.norm_scale = j.value("norm_scale", 1.0);
    m.residual_rmse_px = j.value("residual_rmse_px", 0.0);
    m.n_points = j.value("n_points", 0);
    const auto expected = static_cast<std::size_t>(monomial_count(m.degree));
    if (m.degree < 1 || m.coeffs_x.size() != expected || m.coeffs_y.size() != expected) {
      throw Error(ErrorCode::MalformedRecord, "coefficient count does not match degree");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("calibration model: ") + e.what());
  }
}

std::vector<GazeSample> parse_raw_samples(std::string_view text) {
  std::vector<GazeSample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      GazeSample s;
      s.timestamp_us = j.at("t_us").get<std::int64_t>();
      s.pupil_xy = {j.at("pupil_x").get<double>(), j.at("pupil_y").get<double>()};
      s.confidence = j.value("conf", 1.0);
      const auto eye = j.value("eye", std::string("merged"));
      s.eye = eye == "left" ? Eye::Left : eye == "right" ? Eye::Right : Eye::Merged;
      if (j.contains("frame") && !j["frame"].is_null()) s.scene_frame_index = j["frame"].get<std::int64_t>();
      if (!(s.confidence >= 0.0 && s.confidence <= 1.0)) throw Error(ErrorCode::MalformedRecord, "conf outside [0,1]");
      out.push_back(s);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace e2r
