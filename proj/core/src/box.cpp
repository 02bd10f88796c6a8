#include "cost/box.hpp"

#include <algorithm>
#include <cmath>

namespace cost {

bool BoundingBox::valid() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w >= 0.0 && h >= 0.0;
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  return (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double giou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  const double cw = std::max(a.right(), b.right()) - std::min(a.x, b.x);
  const double ch = std::max(a.bottom(), b.bottom()) - std::min(a.y, b.y);
  const double enclosing = cw * ch;
  if (uni <= 0.0 || enclosing <= 0.0) return 0.0;
  return inter / uni - (enclosing - uni) / enclosing;
}

}  // namespace cost
