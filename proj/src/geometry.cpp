#include "stqa/geometry.hpp"

#include <cmath>

namespace stqa {

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

bool BBox::valid() const { return bbox_violation(*this).empty(); }

std::string bbox_violation(const BBox& box) {
  if (!std::isfinite(box.x1) || !std::isfinite(box.y1) ||
      !std::isfinite(box.x2) || !std::isfinite(box.y2)) {
    return "non-finite coordinate";
  }
  if (box.x1 < 0.0 || box.y1 < 0.0 || box.x2 > 1.0 || box.y2 > 1.0) {
    return "coordinate outside [0,1]";
  }
  if (box.x1 >= box.x2) return "x1 >= x2";
  if (box.y1 >= box.y2) return "y1 >= y2";
  return {};
}

bool Box1000::valid() const {
  return x1 >= 0 && y1 >= 0 && x2 <= 1000 && y2 <= 1000 && x1 < x2 && y1 < y2;
}

namespace {

int quantize(double coord) { return static_cast<int>(std::lround(coord * 1000.0)); }

void widen(int& lo, int& hi) {
  if (lo < hi) return;
  if (lo >= 1000) {
    hi = 1000;
    lo = 999;
  } else {
    hi = lo + 1;
  }
}

}  // namespace

Box1000 quantize_bbox(const BBox& box) {
  Box1000 out{quantize(box.x1), quantize(box.y1), quantize(box.x2), quantize(box.y2)};
  widen(out.x1, out.x2);
  widen(out.y1, out.y2);
  return out;
}

BBox to_unit(const Box1000& box) {
  return {box.x1 / 1000.0, box.y1 / 1000.0, box.x2 / 1000.0, box.y2 / 1000.0};
}

std::string render_box(const Box1000& box) {
  return std::to_string(box.x1) + ", " + std::to_string(box.y1) + ", " +
         std::to_string(box.x2) + ", " + std::to_string(box.y2);
}

}  // namespace stqa
