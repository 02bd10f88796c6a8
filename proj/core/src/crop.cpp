#include "cost/crop.hpp"

#include <cmath>
#include <stdexcept>

namespace cost {

CropResult crop_window(const RgbImage& frame, const BoundingBox& box, double scale, std::size_t out_size,
                       double shift_x, double shift_y) {
  if (!box.valid() || box.area() <= 0.0) throw std::invalid_argument("crop_region: box has zero area");
  if (out_size == 0 || !(scale > 0.0)) throw std::invalid_argument("crop_region: bad scale or output size");
  const double side = scale * std::sqrt(box.w * box.h);
  const double px = side / static_cast<double>(out_size);
  const double x0 = box.cx() - 0.5 * side + shift_x * px;
  const double y0 = box.cy() - 0.5 * side + shift_y * px;
  CropResult r;
  r.raw = resample_window(frame, x0, y0, side, out_size);
  r.transform = {x0, y0, px};
  r.window = {x0, y0, side, side};
  return r;
}

RegionCrop crop_region(const RgbImage& frame, const BoundingBox& box, double scale, std::size_t out_size) {
  CropResult c = crop_window(frame, box, scale, out_size);
  return {ImageTensor::normalize(c.raw), c.transform, c.window};
}

}  // namespace cost
