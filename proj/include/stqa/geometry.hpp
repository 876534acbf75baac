#pragma once

#include <array>
#include <string>

namespace stqa {

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

double distance(Point a, Point b);

// Axis-aligned box in unit frame coordinates (fractions of width/height),
// origin top-left, y pointing down.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  Point centroid() const { return {(x1 + x2) / 2.0, (y1 + y2) / 2.0}; }
  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  // 0 <= x1 < x2 <= 1 and 0 <= y1 < y2 <= 1.
  bool valid() const;

  bool operator==(const BBox&) const = default;
};

// Empty string when valid, otherwise the first violated constraint.
std::string bbox_violation(const BBox& box);

// Integer box in thousandths of the frame, the rendering used in QA text.
struct Box1000 {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  bool valid() const;
  std::array<int, 4> as_array() const { return {x1, y1, x2, y2}; }

  bool operator==(const Box1000&) const = default;
};

// round(coord * 1000); a pair collapsed by rounding is widened by one unit
// on the far side (or the near side when already at 1000).
Box1000 quantize_bbox(const BBox& box);

BBox to_unit(const Box1000& box);

// "x1, y1, x2, y2"
std::string render_box(const Box1000& box);

}  // namespace stqa
