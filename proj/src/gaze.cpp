#include "e2r/gaze.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "e2r/error.hpp"

namespace e2r {

using nlohmann::json;

void ViewingGeometry::validate() const {
  if (screen_width_px <= 0 || screen_height_px <= 0 || !(screen_width_mm > 0.0) ||
      !(viewing_distance_mm > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "viewing geometry fields must be strictly positive");
  }
}

double ViewingGeometry::visual_angle_deg(double px) const {
  const double d_mm = px * mm_per_px();
  return 2.0 * std::atan(d_mm / (2.0 * viewing_distance_mm)) * 180.0 / std::numbers::pi;
}

void refresh_stream_stats(GazeStream& stream) {
  if (stream.samples.size() < 2) {
    stream.duration_us = 0;
    stream.sample_rate_hz = 0.0;
    return;
  }
  stream.duration_us = stream.samples.back().timestamp_us - stream.samples.front().timestamp_us;
  stream.sample_rate_hz =
      static_cast<double>(stream.samples.size() - 1) * 1e6 / static_cast<double>(stream.duration_us);
}

bool contiguous_pair(const GazeStream& stream, std::size_t i) {
  const auto t0 = stream.samples[i].timestamp_us;
  const auto t1 = stream.samples[i + 1].timestamp_us;
  // First gap ending after t0; it breaks the pair if it also starts before t1.
  auto it = std::upper_bound(stream.gaps.begin(), stream.gaps.end(), t0,
                             [](std::int64_t t, const TimeSpan& g) { return t < g.end_us; });
  return it == stream.gaps.end() || !(it->start_us > t0 && it->start_us < t1);
}

std::int64_t valid_duration_us(const GazeStream& stream) {
  std::int64_t total = 0;
  for (std::size_t i = 0; i + 1 < stream.samples.size(); ++i) {
    if (contiguous_pair(stream, i)) {
      total += stream.samples[i + 1].timestamp_us - stream.samples[i].timestamp_us;
    }
  }
  return total;
}

namespace {

ScreenGazePoint parse_record(const std::string& line, std::size_t line_no, const ViewingGeometry& geometry) {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": " + why);
  };
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(e.what());
  }
  if (!j.is_object()) fail("record is not an object");
  auto number = [&](const char* key) -> double {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number()) fail(std::string("missing numeric field '") + key + "'");
    return it->get<double>();
  };
  ScreenGazePoint p;
  auto t = j.find("t_us");
  if (t == j.end() || !t->is_number_integer()) fail("missing integer field 't_us'");
  p.timestamp_us = t->get<std::int64_t>();
  p.screen_xy = {number("x"), number("y")};
  p.confidence = number("conf");
  if (!std::isfinite(p.screen_xy.x) || !std::isfinite(p.screen_xy.y)) fail("non-finite coordinate");
  if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) fail("conf outside [0,1]");
  if (auto f = j.find("frame"); f != j.end() && !f->is_null()) {
    if (!f->is_number_integer()) fail("'frame' must be an integer or null");
    p.frame = f->get<std::int64_t>();
  }
  p.valid = geometry.screen_size().contains(p.screen_xy);
  return p;
}

}  // namespace

std::vector<ScreenGazePoint> parse_gaze_records(std::string_view raw, const ViewingGeometry& geometry) {
  std::vector<ScreenGazePoint> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    auto end = raw.find('\n', pos);
    if (end == std::string_view::npos) end = raw.size();
    ++line_no;
    std::string line(raw.substr(pos, end - pos));
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    records.push_back(parse_record(line, line_no, geometry));
  }
  return records;
}

GazeStream ingest_stream(std::string_view raw, const ViewingGeometry& geometry) {
  geometry.validate();
  auto records = parse_gaze_records(raw, geometry);
  if (records.empty()) throw Error(ErrorCode::EmptyStream, "no gaze records");

  std::stable_sort(records.begin(), records.end(),
                   [](const auto& a, const auto& b) { return a.timestamp_us < b.timestamp_us; });
  GazeStream stream;
  stream.samples.reserve(records.size());
  for (const auto& r : records) {
    if (!stream.samples.empty() && stream.samples.back().timestamp_us == r.timestamp_us) {
      if (r.confidence > stream.samples.back().confidence) stream.samples.back() = r;
      continue;
    }
    stream.samples.push_back(r);
  }
  if (stream.samples.size() < 2) {
    throw Error(ErrorCode::EmptyStream, "need at least 2 distinct timestamps");
  }
  refresh_stream_stats(stream);
  return stream;
}

BlinkRemoval remove_blinks(const GazeStream& stream, double conf_threshold) {
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "conf_threshold must lie in [0,1]");
  }
  BlinkRemoval out;
  out.stream.gaps = stream.gaps;
  std::optional<TimeSpan> open;
  for (const auto& s : stream.samples) {
    if (s.confidence >= conf_threshold) {
      if (open) {
        out.removed_spans.push_back(*open);
        open.reset();
      }
      out.stream.samples.push_back(s);
      continue;
    }
    ++out.removed_count;
    if (open) {
      open->end_us = s.timestamp_us;
    } else {
      open = TimeSpan{s.timestamp_us, s.timestamp_us};
    }
  }
  if (open) out.removed_spans.push_back(*open);

  out.stream.gaps.insert(out.stream.gaps.end(), out.removed_spans.begin(), out.removed_spans.end());
  std::sort(out.stream.gaps.begin(), out.stream.gaps.end(),
            [](const TimeSpan& a, const TimeSpan& b) { return a.start_us < b.start_us; });
  refresh_stream_stats(out.stream);
  return out;
}

std::string to_jsonl_record(const ScreenGazePoint& p) {
  json j = {{"t_us", p.timestamp_us}, {"x", p.screen_xy.x}, {"y", p.screen_xy.y}, {"conf", p.confidence}};
  j["frame"] = p.frame ? json(*p.frame) : json(nullptr);
  return j.dump() + "\n";
}

std::string to_jsonl(const GazeStream& stream) {
  std::string out;
  for (const auto& s : stream.samples) out += to_jsonl_record(s);
  return out;
}

}  // namespace e2r
