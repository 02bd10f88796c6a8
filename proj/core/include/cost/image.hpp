#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "cost/box.hpp"
#include "cost/tensor.hpp"

namespace cost {

/// Interleaved 8-bit RGB raster.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, std::array<std::uint8_t, 3> fill = {0, 0, 0});

  std::uint8_t* at(std::size_t x, std::size_t y) { return pixels.data() + 3 * (y * width + x); }
  const std::uint8_t* at(std::size_t x, std::size_t y) const { return pixels.data() + 3 * (y * width + x); }
  /// Mean luma (Rec. 601 weights) over all pixels, on the 0..255 scale.
  double mean_brightness() const;
};

// Natural-image statistics on the 0..1 scale.
inline constexpr std::array<double, 3> kChannelMean = {0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kChannelStd = {0.229, 0.224, 0.225};

/// Planar float crop on the 0..255 scale, [3 x H x W], before normalization.
struct RawCrop {
  std::size_t size = 0;
  std::vector<double> values;
};

/// Normalized [3 x H x W] image tensor fed to the visual branch.
class ImageTensor {
 public:
  ImageTensor() = default;
  /// Validates 3 channels and finite values.
  explicit ImageTensor(Tensor values);

  static ImageTensor normalize(const RawCrop& crop, double brightness = 1.0);

  const Tensor& tensor() const { return values_; }
  std::size_t height() const { return values_.dim(1); }
  std::size_t width() const { return values_.dim(2); }

 private:
  Tensor values_;
};

/// Maps crop-pixel coordinates back to frame pixels: frame = origin + crop * scale.
struct CropTransform {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double scale = 1.0;

  BoundingBox to_frame(const BoundingBox& crop_box) const;
  BoundingBox to_crop(const BoundingBox& frame_box) const;
};

/// Bilinear resample of the square frame window [x0, y0, side, side] to
/// out_size x out_size. Samples falling outside the frame take the channel mean.
RawCrop resample_window(const RgbImage& frame, double x0, double y0, double side, std::size_t out_size);

RgbImage read_png(const std::filesystem::path& path);
/// Width and height from the PNG header, without decoding pixels.
std::array<std::size_t, 2> png_dimensions(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);

}  // namespace cost
