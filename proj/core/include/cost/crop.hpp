#pragma once

#include "cost/box.hpp"
#include "cost/image.hpp"

namespace cost {

struct CropResult {
  RawCrop raw;
  CropTransform transform;
  BoundingBox window;  ///< crop window in frame pixels
};

/// Square window of side scale * sqrt(w * h) centred on the box (shifted by
/// (shift_x, shift_y) output pixels), resampled to out_size. Throws
/// std::invalid_argument for a zero-area or invalid box.
CropResult crop_window(const RgbImage& frame, const BoundingBox& box, double scale, std::size_t out_size,
                       double shift_x = 0.0, double shift_y = 0.0);

struct RegionCrop {
  ImageTensor image;
  CropTransform transform;
  BoundingBox window;
};

/// crop_window followed by per-channel normalization.
RegionCrop crop_region(const RgbImage& frame, const BoundingBox& box, double scale, std::size_t out_size);

}  // namespace cost
