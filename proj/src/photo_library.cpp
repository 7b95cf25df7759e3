#include "e2r/photo_library.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "e2r/error.hpp"
#include "e2r/image.hpp"

namespace e2r {

using nlohmann::json;

std::string_view theme_id(Theme t) {
  switch (t) {
    case Theme::Childhood: return "Childhood";
    case Theme::CulturalHeritage: return "CulturalHeritage";
    case Theme::UrbanDevelopment: return "UrbanDevelopment";
    case Theme::TripOfALifetime: return "TripOfALifetime";
    case Theme::LifeEvents: return "LifeEvents";
  }
  return "";
}

std::string_view theme_display(Theme t) {
  switch (t) {
    case Theme::Childhood: return "Childhood";
    case Theme::CulturalHeritage: return "Cultural Heritage";
    case Theme::UrbanDevelopment: return "Urban Development";
    case Theme::TripOfALifetime: return "Trip of a Lifetime";
    case Theme::LifeEvents: return "Life Events";
  }
  return "";
}

std::string_view theme_numeral(Theme t) {
  static constexpr std::string_view kNumerals[] = {"i", "ii", "iii", "iv", "v"};
  return kNumerals[static_cast<int>(t)];
}

namespace {

std::string fold(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

}  // namespace

std::optional<Theme> parse_theme(std::string_view text) {
  const auto key = fold(text);
  for (auto t : kThemeOrder) {
    if (key == fold(theme_id(t)) || key == fold(theme_display(t)) || key == theme_numeral(t)) return t;
  }
  return std::nullopt;
}

const PhotoRecord* PhotoLibrary::find(std::string_view photo_id) const {
  for (const auto& p : photos) {
    if (p.photo_id == photo_id) return &p;
  }
  return nullptr;
}

double polygon_area(const std::vector<Point2>& polygon) {
  double a = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const auto& p = polygon[i];
    const auto& q = polygon[(i + 1) % polygon.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return std::abs(a) * 0.5;
}

namespace {

double orient(Point2 a, Point2 b, Point2 c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

bool segments_cross(Point2 a, Point2 b, Point2 c, Point2 d) {
  const double o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0))) return true;
  auto on_segment = [](Point2 p, Point2 q, Point2 r) {
    return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) && std::min(p.y, q.y) <= r.y &&
           r.y <= std::max(p.y, q.y);
  };
  return (o1 == 0 && on_segment(a, b, c)) || (o2 == 0 && on_segment(a, b, d)) ||
         (o3 == 0 && on_segment(c, d, a)) || (o4 == 0 && on_segment(c, d, b));
}

// Sutherland-Hodgman against one half-plane.
std::vector<Point2> clip(const std::vector<Point2>& poly, auto inside, auto intersect) {
  std::vector<Point2> out;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2 cur = poly[i];
    const Point2 prev = poly[(i + poly.size() - 1) % poly.size()];
    const bool ci = inside(cur), pi = inside(prev);
    if (ci) {
      if (!pi) out.push_back(intersect(prev, cur));
      out.push_back(cur);
    } else if (pi) {
      out.push_back(intersect(prev, cur));
    }
  }
  return out;
}

}  // namespace

bool polygon_is_simple(const std::vector<Point2>& polygon) {
  const auto n = polygon.size();
  if (n < 3 || polygon_area(polygon) <= 0.0) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool neighbours = j == i + 1 || (i == 0 && j == n - 1);
      if (neighbours) continue;
      if (segments_cross(polygon[i], polygon[(i + 1) % n], polygon[j], polygon[(j + 1) % n])) return false;
    }
  }
  return true;
}

double polygon_rect_overlap(const std::vector<Point2>& polygon, const Rect& r) {
  auto lerp_x = [](Point2 a, Point2 b, double x) {
    const double t = (x - a.x) / (b.x - a.x);
    return Point2{x, a.y + t * (b.y - a.y)};
  };
  auto lerp_y = [](Point2 a, Point2 b, double y) {
    const double t = (y - a.y) / (b.y - a.y);
    return Point2{a.x + t * (b.x - a.x), y};
  };
  auto p = clip(polygon, [&](Point2 q) { return q.x >= r.x0; }, [&](Point2 a, Point2 b) { return lerp_x(a, b, r.x0); });
  p = clip(p, [&](Point2 q) { return q.x <= r.x1; }, [&](Point2 a, Point2 b) { return lerp_x(a, b, r.x1); });
  p = clip(p, [&](Point2 q) { return q.y >= r.y0; }, [&](Point2 a, Point2 b) { return lerp_y(a, b, r.y0); });
  p = clip(p, [&](Point2 q) { return q.y <= r.y1; }, [&](Point2 a, Point2 b) { return lerp_y(a, b, r.y1); });
  return p.size() < 3 ? 0.0 : polygon_area(p);
}

PhotoLibrary parse_photo_library(std::string_view manifest_json, const std::filesystem::path& root) {
  PhotoLibrary lib;
  lib.root = root;
  json j;
  try {
    j = json::parse(manifest_json);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("photo manifest: ") + e.what());
  }
  const json& list = j.is_array() ? j : j.value("photos", json::array());
  std::set<std::string> ids;
  for (const auto& p : list) {
    try {
      PhotoRecord rec;
      rec.photo_id = p.at("id").get<std::string>();
      if (!ids.insert(rec.photo_id).second) {
        throw Error(ErrorCode::ConfigInvalid, "duplicate photo id '" + rec.photo_id + "'");
      }
      const auto theme = parse_theme(p.at("theme").get<std::string>());
      if (!theme) throw Error(ErrorCode::ConfigInvalid, "photo '" + rec.photo_id + "': unknown theme");
      rec.theme = *theme;
      rec.image_path = p.value("path", std::string());
      if (!rec.image_path.empty() && rec.image_path.is_relative()) rec.image_path = root / rec.image_path;
      rec.era = p.value("era", std::string());
      rec.size = {p.value("width", 0), p.value("height", 0)};
      if ((rec.size.width <= 0 || rec.size.height <= 0) && !rec.image_path.empty() &&
          std::filesystem::exists(rec.image_path)) {
        rec.size = image_size(rec.image_path);
      }
      if (rec.size.width <= 0 || rec.size.height <= 0) {
        throw Error(ErrorCode::ConfigInvalid, "photo '" + rec.photo_id + "': size unknown (no width/height and image not found: " +
                                               rec.image_path.string() + ")");
      }
      for (const auto& r : p.value("regions", json::array())) {
        AnnotatedRegion region;
        region.label = r.at("label").get<std::string>();
        for (const auto& v : r.at("polygon")) region.polygon.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
        if (!polygon_is_simple(region.polygon)) {
          throw Error(ErrorCode::ConfigInvalid, "photo '" + rec.photo_id + "': region '" + region.label + "' is not a simple polygon");
        }
        for (auto v : region.polygon) {
          if (v.x < 0 || v.y < 0 || v.x > rec.size.width || v.y > rec.size.height) {
            throw Error(ErrorCode::ConfigInvalid, "photo '" + rec.photo_id + "': region '" + region.label + "' leaves the photo");
          }
        }
        rec.annotated_regions.push_back(std::move(region));
      }
      lib.photos.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigInvalid, std::string("photo manifest entry: ") + e.what());
    }
  }
  return lib;
}

PhotoLibrary load_photo_library(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "photo manifest not readable: " + manifest_path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_photo_library(ss.str(), manifest_path.parent_path());
}

std::string to_json(const PhotoLibrary& library) {
  json list = json::array();
  for (const auto& p : library.photos) {
    json regions = json::array();
    for (const auto& r : p.annotated_regions) {
      json poly = json::array();
      for (auto v : r.polygon) poly.push_back({v.x, v.y});
      regions.push_back({{"label", r.label}, {"polygon", poly}});
    }
    list.push_back({{"id", p.photo_id},
                    {"theme", theme_id(p.theme)},
                    {"path", p.image_path.string()},
                    {"era", p.era},
                    {"width", p.size.width},
                    {"height", p.size.height},
                    {"regions", regions}});
  }
  return json{{"photos", list}}.dump(2);
}

}  // namespace e2r
