#pragma once

namespace cost {

/// Axis-aligned box, top-left anchored, in pixels.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  /// Finite with nonnegative extent.
  bool valid() const;
  bool empty() const { return !(w > 0.0 && h > 0.0); }

  static BoundingBox from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, w, h};
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

double intersection_area(const BoundingBox& a, const BoundingBox& b);
double iou(const BoundingBox& a, const BoundingBox& b);
/// IoU minus the fraction of the smallest enclosing box not covered by the
/// union. Two zero-area boxes give 0.
double giou(const BoundingBox& a, const BoundingBox& b);

}  // namespace cost
