#include "e2r/oculomotor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>

#include "e2r/error.hpp"

namespace e2r {

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::TooFewSamples, "median of empty set");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double dispersion_threshold(std::span<const double> distances) {
  if (distances.empty()) throw Error(ErrorCode::TooFewSamples, "no distances");
  const double med = median({distances.begin(), distances.end()});
  std::vector<double> dev;
  dev.reserve(distances.size());
  for (double d : distances) dev.push_back(std::abs(d - med));
  return med + 1.5 * median(std::move(dev));
}

double dispersion_threshold(const GazeStream& stream) {
  if (stream.samples.size() < 3) {
    throw Error(ErrorCode::TooFewSamples, std::to_string(stream.samples.size()) + " samples, need 3");
  }
  std::vector<double> d;
  d.reserve(stream.samples.size());
  for (std::size_t i = 0; i + 1 < stream.samples.size(); ++i) {
    const auto& a = stream.samples[i];
    const auto& b = stream.samples[i + 1];
    if (!a.valid || !b.valid || !contiguous_pair(stream, i)) continue;
    d.push_back(distance(a.screen_xy, b.screen_xy));
  }
  if (d.size() < 2) throw Error(ErrorCode::TooFewSamples, "fewer than 2 usable consecutive pairs");
  return dispersion_threshold(d);
}

std::vector<FixationEvent> detect_fixations(const GazeStream& stream, double threshold_px,
                                            std::int64_t min_duration_us) {
  if (!(threshold_px > 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold_px must be > 0");
  const auto& s = stream.samples;
  std::vector<FixationEvent> out;

  std::size_t first = 0;
  std::size_t count = 0;
  double sx = 0.0, sy = 0.0;

  auto close = [&] {
    if (count >= 2) {
      const std::size_t last = first + count - 1;
      const auto dur = s[last].timestamp_us - s[first].timestamp_us;
      if (dur >= min_duration_us) {
        FixationEvent f;
        f.start_us = s[first].timestamp_us;
        f.end_us = s[last].timestamp_us;
        f.centroid_xy = {sx / count, sy / count};
        f.sample_count = static_cast<int>(count);
        for (std::size_t k = first; k <= last; ++k) {
          f.dispersion_px = std::max(f.dispersion_px, distance(s[k].screen_xy, f.centroid_xy));
        }
        out.push_back(f);
      }
    }
    count = 0;
    sx = sy = 0.0;
  };

  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s[i].valid) {
      close();
      continue;
    }
    if (count > 0) {
      const bool adjacent = first + count == i && contiguous_pair(stream, i - 1);
      const Point2 centroid{sx / count, sy / count};
      if (!adjacent || distance(s[i].screen_xy, centroid) > threshold_px) close();
    }
    if (count == 0) first = i;
    ++count;
    sx += s[i].screen_xy.x;
    sy += s[i].screen_xy.y;
  }
  close();
  return out;
}

std::vector<SaccadeEvent> detect_saccades(const GazeStream& stream, const ViewingGeometry& geometry,
                                          double velocity_threshold_deg_s) {
  geometry.validate();
  const auto& s = stream.samples;
  std::vector<SaccadeEvent> out;
  std::optional<SaccadeEvent> run;
  std::size_t run_end = 0;  // index of the last sample in the current run

  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    bool fast = false;
    double angle = 0.0;
    double velocity = 0.0;
    if (s[i].valid && s[i + 1].valid && contiguous_pair(stream, i)) {
      const double dt_s = static_cast<double>(s[i + 1].timestamp_us - s[i].timestamp_us) * 1e-6;
      angle = geometry.visual_angle_deg(distance(s[i].screen_xy, s[i + 1].screen_xy));
      velocity = angle / dt_s;
      fast = velocity > velocity_threshold_deg_s;
    }
    if (fast) {
      if (run && run_end == i) {
        run->end_us = s[i + 1].timestamp_us;
        run->amplitude_deg += angle;
        run->peak_velocity_deg_s = std::max(run->peak_velocity_deg_s, velocity);
      } else {
        if (run) out.push_back(*run);
        run = SaccadeEvent{s[i].timestamp_us, s[i + 1].timestamp_us, angle, velocity};
      }
      run_end = i + 1;
    } else if (run) {
      out.push_back(*run);
      run.reset();
    }
  }
  if (run) out.push_back(*run);
  return out;
}

GazeMetrics compute_metrics(std::span<const FixationEvent> fixations, std::span<const SaccadeEvent> saccades,
                            const GazeStream& stream) {
  const auto valid_us = valid_duration_us(stream);
  if (valid_us <= 0) throw Error(ErrorCode::ZeroDuration, "stream has no valid duration");
  std::int64_t fix_us = 0;
  for (const auto& f : fixations) fix_us += f.duration_us();
  GazeMetrics m;
  m.total_duration_s = static_cast<double>(valid_us) * 1e-6;
  m.fixation_ratio_pct = std::clamp(100.0 * static_cast<double>(fix_us) / static_cast<double>(valid_us), 0.0, 100.0);
  m.saccade_frequency_hz = static_cast<double>(saccades.size()) / m.total_duration_s;
  return m;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kThemeColumns[5] = {"i", "ii", "iii", "iv", "v"};
constexpr const char* kFixationLabel = "Fixation Ratio (%)";
constexpr const char* kSaccadeLabel = "Saccade Frequency (Hz)";

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

struct Cell {
  double fix = 0.0;
  double sac = 0.0;
  int n = 0;
};

}  // namespace

std::string metrics_table_csv(std::span<const MetricsRow> rows) {
  std::vector<std::string> order;
  std::map<std::string, std::array<Cell, 5>> table;
  for (const auto& r : rows) {
    if (r.theme_index < 0 || r.theme_index > 4) throw Error(ErrorCode::InvalidArgument, "theme index out of range");
    if (!table.contains(r.participant)) order.push_back(r.participant);
    auto& c = table[r.participant][r.theme_index];
    c.fix += r.metrics.fixation_ratio_pct;
    c.sac += r.metrics.saccade_frequency_hz;
    ++c.n;
  }

  std::ostringstream out;
  out << "participant,metric";
  for (const auto* c : kThemeColumns) out << ',' << c;
  out << ",AVG\n";

  std::array<Cell, 5> theme_totals{};
  Cell avg_total;
  for (const auto& p : order) {
    const auto& cells = table[p];
    std::string fix_line = p + "," + kFixationLabel;
    std::string sac_line = p + "," + kSaccadeLabel;
    double fsum = 0.0, ssum = 0.0;
    int present = 0;
    for (int t = 0; t < 5; ++t) {
      const auto& c = cells[t];
      if (c.n == 0) {
        fix_line += ",";
        sac_line += ",";
        continue;
      }
      const double f = c.fix / c.n, s = c.sac / c.n;
      fix_line += "," + fmt(f, 2);
      sac_line += "," + fmt(s, 3);
      fsum += f;
      ssum += s;
      ++present;
      theme_totals[t].fix += f;
      theme_totals[t].sac += s;
      ++theme_totals[t].n;
    }
    const double favg = fsum / present, savg = ssum / present;
    fix_line += "," + fmt(favg, 2);
    sac_line += "," + fmt(savg, 3);
    avg_total.fix += favg;
    avg_total.sac += savg;
    ++avg_total.n;
    out << fix_line << '\n' << sac_line << '\n';
  }
  if (avg_total.n > 0) {
    std::string fix_line = std::string("AVG,") + kFixationLabel;
    std::string sac_line = std::string("AVG,") + kSaccadeLabel;
    for (const auto& c : theme_totals) {
      fix_line += c.n ? "," + fmt(c.fix / c.n, 2) : ",";
      sac_line += c.n ? "," + fmt(c.sac / c.n, 3) : ",";
    }
    fix_line += "," + fmt(avg_total.fix / avg_total.n, 2);
    sac_line += "," + fmt(avg_total.sac / avg_total.n, 3);
    out << fix_line << '\n' << sac_line << '\n';
  }
  return out.str();
}

std::vector<MetricsRow> parse_metrics_table_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<MetricsRow> rows;
  std::map<std::pair<std::string, int>, std::size_t> index;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string col;
    while (std::getline(ls, col, ',')) cols.push_back(col);
    if (!line.empty() && line.back() == ',') cols.emplace_back();
    if (cols.size() != 8) {
      throw Error(ErrorCode::MalformedRecord, "metrics table line " + std::to_string(line_no) + ": expected 8 columns");
    }
    if (cols[0] == "AVG") continue;
    const bool is_fix = cols[1] == kFixationLabel;
    if (!is_fix && cols[1] != kSaccadeLabel) {
      throw Error(ErrorCode::MalformedRecord, "metrics table line " + std::to_string(line_no) + ": unknown metric");
    }
    for (int t = 0; t < 5; ++t) {
      if (cols[2 + t].empty()) continue;
      const double v = std::stod(cols[2 + t]);
      const auto key = std::make_pair(cols[0], t);
      auto it = index.find(key);
      if (it == index.end()) {
        it = index.emplace(key, rows.size()).first;
        rows.push_back({cols[0], t, {}});
      }
      (is_fix ? rows[it->second].metrics.fixation_ratio_pct : rows[it->second].metrics.saccade_frequency_hz) = v;
    }
  }
  return rows;
}

}  // namespace e2r
