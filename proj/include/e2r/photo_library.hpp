#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "e2r/geometry.hpp"

namespace e2r {

// Canonical viewing order i..v.
enum class Theme { Childhood = 0, CulturalHeritage, UrbanDevelopment, TripOfALifetime, LifeEvents };

inline constexpr std::array<Theme, 5> kThemeOrder{Theme::Childhood, Theme::CulturalHeritage,
                                                 Theme::UrbanDevelopment, Theme::TripOfALifetime,
                                                 Theme::LifeEvents};

std::string_view theme_id(Theme t);       // "Childhood", "CulturalHeritage", ...
std::string_view theme_display(Theme t);  // "Childhood", "Cultural Heritage", ...
std::string_view theme_numeral(Theme t);  // "i" .. "v"
// Accepts the id, the display name, or the numeral. Case-insensitive.
std::optional<Theme> parse_theme(std::string_view text);

struct AnnotatedRegion {
  std::vector<Point2> polygon;
  std::string label;
};

struct PhotoRecord {
  std::string photo_id;
  Theme theme = Theme::Childhood;
  std::filesystem::path image_path;
  Size2 size;
  std::vector<AnnotatedRegion> annotated_regions;
  std::string era;
};

struct PhotoLibrary {
  std::filesystem::path root;
  std::vector<PhotoRecord> photos;

  const PhotoRecord* find(std::string_view photo_id) const;
};

double polygon_area(const std::vector<Point2>& polygon);
bool polygon_is_simple(const std::vector<Point2>& polygon);
// Area of the polygon (simple) clipped to the rectangle.
double polygon_rect_overlap(const std::vector<Point2>& polygon, const Rect& rect);

// Validates themes, polygons (simple, within the photo) and image sizes.
// Sizes missing from the manifest are read from the image header.
PhotoLibrary load_photo_library(const std::filesystem::path& manifest_path);
PhotoLibrary parse_photo_library(std::string_view manifest_json, const std::filesystem::path& root);
std::string to_json(const PhotoLibrary& library);

}  // namespace e2r
