#include <doctest.h>

#include "e2r/error.hpp"
#include "e2r/photo_library.hpp"
#include "helpers.hpp"

using namespace e2r;

namespace {

ErrorCode parse_error(const std::string& text) {
  try {
    parse_photo_library(text, {});
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

}  // namespace

TEST_SUITE("photo_library") {
  TEST_CASE("theme names, numerals and order") {
    CHECK(theme_numeral(Theme::Childhood) == "i");
    CHECK(theme_numeral(Theme::LifeEvents) == "v");
    CHECK(theme_display(Theme::CulturalHeritage) == "Cultural Heritage");
    CHECK(parse_theme("urban development") == Theme::UrbanDevelopment);
    CHECK(parse_theme("TripOfALifetime") == Theme::TripOfALifetime);
    CHECK(parse_theme("iv") == Theme::TripOfALifetime);
    CHECK_FALSE(parse_theme("Holidays"));
    for (int i = 0; i < 5; ++i) CHECK(static_cast<int>(kThemeOrder[i]) == i);
  }

  TEST_CASE("polygon helpers") {
    const std::vector<Point2> square{{0, 0}, {10, 0}, {10, 10}, {0, 10}};
    CHECK(polygon_area(square) == doctest::Approx(100));
    CHECK(polygon_is_simple(square));
    const std::vector<Point2> bowtie{{0, 0}, {10, 10}, {10, 0}, {0, 10}};
    CHECK_FALSE(polygon_is_simple(bowtie));
    CHECK_FALSE(polygon_is_simple({{0, 0}, {1, 1}}));
    CHECK(polygon_rect_overlap(square, {5, 5, 20, 20}) == doctest::Approx(25));
    CHECK(polygon_rect_overlap(square, {20, 20, 30, 30}) == 0.0);
    const std::vector<Point2> tri{{0, 0}, {10, 0}, {0, 10}};
    CHECK(polygon_rect_overlap(tri, {0, 0, 5, 5}) == doctest::Approx(25));
  }

  TEST_CASE("load the test library") {
    testutil::TempDir dir;
    const auto lib = load_photo_library(testutil::write_library(dir.path()));
    REQUIRE(lib.photos.size() == 5);
    const auto* child = lib.find("childhood");
    REQUIRE(child);
    CHECK(child->theme == Theme::Childhood);
    CHECK(child->size == Size2{320, 240});
    CHECK(child->annotated_regions.size() == 2);
    CHECK(child->annotated_regions[0].label == "Television");
    CHECK(child->image_path == dir.path() / "photos/childhood.png");
    CHECK(lib.find("nope") == nullptr);

    const auto back = parse_photo_library(to_json(lib), {});
    REQUIRE(back.photos.size() == 5);
    CHECK(back.photos[1].annotated_regions[1].polygon == child->annotated_regions[1].polygon);
    CHECK(back.photos[1].image_path == child->image_path);
  }

  TEST_CASE("manifest validation") {
    CHECK(parse_error("{") == ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"([{"id":"a","theme":"Nope","width":10,"height":10}])") == ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"([{"id":"a","theme":"i","width":10,"height":10},{"id":"a","theme":"ii","width":10,"height":10}])") ==
          ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"([{"id":"a","theme":"i","path":"missing.png"}])") == ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"([{"id":"a","theme":"i","width":10,"height":10,
        "regions":[{"label":"x","polygon":[[0,0],[10,10],[10,0],[0,10]]}]}])") == ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"([{"id":"a","theme":"i","width":10,"height":10,
        "regions":[{"label":"x","polygon":[[0,0],[20,0],[20,5]]}]}])") == ErrorCode::ConfigInvalid);
    CHECK(parse_error(R"([{"theme":"i","width":10,"height":10}])") == ErrorCode::ConfigInvalid);
    try {
      load_photo_library("/nonexistent/library.json");
      FAIL("expected ConfigInvalid");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigInvalid);
    }
  }
}
