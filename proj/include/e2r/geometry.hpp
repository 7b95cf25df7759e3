#pragma once

#include <cmath>

namespace e2r {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Size2 {
  int width = 0;
  int height = 0;

  bool contains(Point2 p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.x < width && p.y < height;
  }

  friend bool operator==(const Size2&, const Size2&) = default;
};

// Axis-aligned rectangle in pixels, half-open on the max side.
struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }

  friend bool operator==(const Rect&, const Rect&) = default;
};

}  // namespace e2r
