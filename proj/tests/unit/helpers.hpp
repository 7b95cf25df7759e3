#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "e2r/fsutil.hpp"
#include "e2r/gaze.hpp"
#include "e2r/image.hpp"
#include "e2r/photo_library.hpp"

namespace testutil {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("e2r-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline e2r::ScreenGazePoint pt(std::int64_t t_us, double x, double y, double conf = 1.0) {
  e2r::ScreenGazePoint p;
  p.timestamp_us = t_us;
  p.screen_xy = {x, y};
  p.confidence = conf;
  return p;
}

inline e2r::GazeStream stream_of(std::vector<e2r::ScreenGazePoint> pts) {
  e2r::GazeStream s;
  s.samples = std::move(pts);
  e2r::refresh_stream_stats(s);
  return s;
}

// Smoothed random texture with a few bright rectangles: plenty of corners.
inline e2r::GrayImage textured_image(int w, int h, std::uint64_t seed) {
  e2r::GrayImage img;
  img.width = w;
  img.height = h;
  img.pixels.assign(static_cast<std::size_t>(w) * h, 0);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u8(0, 255);
  const int cell = 8;
  const int cw = (w + cell - 1) / cell + 1, ch = (h + cell - 1) / cell + 1;
  std::vector<int> coarse(static_cast<std::size_t>(cw) * ch);
  for (auto& v : coarse) v = u8(rng);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / cell, fy = static_cast<double>(y) / cell;
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      const double ax = fx - x0, ay = fy - y0;
      auto c = [&](int i, int j) { return coarse[static_cast<std::size_t>(j) * cw + i]; };
      const double v = (1 - ax) * (1 - ay) * c(x0, y0) + ax * (1 - ay) * c(x0 + 1, y0) + (1 - ax) * ay * c(x0, y0 + 1) +
                       ax * ay * c(x0 + 1, y0 + 1);
      img.pixels[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  std::uniform_int_distribution<int> px(0, w - 1), py(0, h - 1), sz(6, 24);
  for (int k = 0; k < 25; ++k) {
    const int x0 = px(rng), y0 = py(rng), rw = sz(rng), rh = sz(rng);
    const auto level = static_cast<std::uint8_t>(k % 2 ? 250 : 5);
    for (int y = y0; y < std::min(h, y0 + rh); ++y) {
      for (int x = x0; x < std::min(w, x0 + rw); ++x) img.pixels[static_cast<std::size_t>(y) * w + x] = level;
    }
  }
  return img;
}

inline e2r::RgbImage to_rgb(const e2r::GrayImage& g) {
  e2r::RgbImage out;
  out.width = g.width;
  out.height = g.height;
  out.pixels.resize(g.pixels.size() * 3);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    out.pixels[3 * i] = g.pixels[i];
    out.pixels[3 * i + 1] = static_cast<std::uint8_t>(255 - g.pixels[i]);
    out.pixels[3 * i + 2] = static_cast<std::uint8_t>(g.pixels[i] / 2);
  }
  return out;
}

// Five 320x240 photos, one per theme, written as PNG, listed in scrambled
// order. The Childhood photo carries "Television" and "Decoration" regions.
inline std::filesystem::path write_library(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "photos");
  const char* ids[] = {"trip", "childhood", "events", "heritage", "urban"};
  const char* themes[] = {"TripOfALifetime", "Childhood", "LifeEvents", "CulturalHeritage", "UrbanDevelopment"};
  nlohmann::json photos = nlohmann::json::array();
  for (int i = 0; i < 5; ++i) {
    const auto img = to_rgb(textured_image(320, 240, 100 + i));
    const auto file = std::string("photos/") + ids[i] + ".png";
    e2r::write_file_bytes(dir / file, e2r::encode_png(img));
    nlohmann::json p = {{"id", ids[i]}, {"theme", themes[i]}, {"path", file}, {"era", "1970s"}};
    if (std::string(ids[i]) == "childhood") {
      p["regions"] = {{{"label", "Television"}, {"polygon", {{40, 40}, {140, 40}, {140, 140}, {40, 140}}}},
                      {{"label", "Decoration"}, {"polygon", {{200, 60}, {300, 60}, {300, 200}, {200, 200}}}}};
    }
    photos.push_back(p);
  }
  const auto manifest = dir / "library.json";
  e2r::write_atomic(manifest, nlohmann::json{{"photos", photos}}.dump(2));
  return manifest;
}

// Gaze JSONL with a fixation at `where` (screen px) for `ms` milliseconds at 100 Hz.
inline std::string dwell_jsonl(std::int64_t t0_us, double x, double y, int ms, bool jitter = true) {
  std::string out;
  for (int k = 0; k < ms / 10; ++k) {
    const double dx = jitter ? (k % 2) * 2.0 : 0.0;
    out += e2r::to_jsonl_record(pt(t0_us + k * 10'000, x + dx, y));
  }
  return out;
}

}  // namespace testutil
