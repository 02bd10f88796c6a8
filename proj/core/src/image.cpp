#include "cost/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace cost {

RgbImage::RgbImage(std::size_t w, std::size_t h, std::array<std::uint8_t, 3> fill) : width(w), height(h) {
  pixels.resize(3 * w * h);
  for (std::size_t i = 0; i < w * h; ++i) {
    pixels[3 * i] = fill[0];
    pixels[3 * i + 1] = fill[1];
    pixels[3 * i + 2] = fill[2];
  }
}

double RgbImage::mean_brightness() const {
  if (pixels.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i + 2 < pixels.size(); i += 3)
    s += 0.299 * pixels[i] + 0.587 * pixels[i + 1] + 0.114 * pixels[i + 2];
  return s / static_cast<double>(width * height);
}

ImageTensor::ImageTensor(Tensor values) : values_(std::move(values)) {
  if (values_.rank() != 3 || values_.dim(0) != 3)
    throw ShapeError("image tensor must be [3 x H x W], got " + shape_str(values_.shape()));
  for (double v : values_.data())
    if (!std::isfinite(v)) throw NumericError("image tensor holds a non-finite value");
}

ImageTensor ImageTensor::normalize(const RawCrop& crop, double brightness) {
  const std::size_t plane = crop.size * crop.size;
  std::vector<double> out(crop.values.size());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      const double v = crop.values[c * plane + i] * brightness / 255.0;
      out[c * plane + i] = (v - kChannelMean[c]) / kChannelStd[c];
    }
  return ImageTensor(Tensor::from({3, crop.size, crop.size}, std::move(out)));
}

BoundingBox CropTransform::to_frame(const BoundingBox& b) const {
  return {origin_x + b.x * scale, origin_y + b.y * scale, b.w * scale, b.h * scale};
}

BoundingBox CropTransform::to_crop(const BoundingBox& b) const {
  return {(b.x - origin_x) / scale, (b.y - origin_y) / scale, b.w / scale, b.h / scale};
}

RawCrop resample_window(const RgbImage& frame, double x0, double y0, double side, std::size_t out_size) {
  RawCrop crop;
  crop.size = out_size;
  crop.values.resize(3 * out_size * out_size);
  const double step = side / static_cast<double>(out_size);
  const std::size_t plane = out_size * out_size;
  const double pad[3] = {kChannelMean[0] * 255.0, kChannelMean[1] * 255.0, kChannelMean[2] * 255.0};
  const auto W = static_cast<std::ptrdiff_t>(frame.width);
  const auto H = static_cast<std::ptrdiff_t>(frame.height);
  auto texel = [&](std::ptrdiff_t px, std::ptrdiff_t py, std::size_t c) -> double {
    if (px < 0 || py < 0 || px >= W || py >= H) return pad[c];
    return frame.at(static_cast<std::size_t>(px), static_cast<std::size_t>(py))[c];
  };
  for (std::size_t v = 0; v < out_size; ++v) {
    const double fy = y0 + (static_cast<double>(v) + 0.5) * step - 0.5;
    const double y_floor = std::floor(fy);
    const double ty = fy - y_floor;
    const auto iy = static_cast<std::ptrdiff_t>(y_floor);
    for (std::size_t u = 0; u < out_size; ++u) {
      const double fx = x0 + (static_cast<double>(u) + 0.5) * step - 0.5;
      const double x_floor = std::floor(fx);
      const double tx = fx - x_floor;
      const auto ix = static_cast<std::ptrdiff_t>(x_floor);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = (1.0 - tx) * texel(ix, iy, c) + tx * texel(ix + 1, iy, c);
        const double bot = (1.0 - tx) * texel(ix, iy + 1, c) + tx * texel(ix + 1, iy + 1, c);
        crop.values[c * plane + v * out_size + u] = (1.0 - ty) * top + ty * bot;
      }
    }
  }
  return crop;
}

namespace {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace

RgbImage read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw std::runtime_error("cannot read PNG " + path.string() + ": " + img.message);
  img.format = PNG_FORMAT_RGB;
  RgbImage out;
  out.width = img.width;
  out.height = img.height;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw std::runtime_error("cannot decode PNG " + path.string() + ": " + msg);
  }
  return out;
}

std::array<std::size_t, 2> png_dimensions(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw std::runtime_error(path.string() + ": not a readable PNG (" + img.message + ")");
  const std::array<std::size_t, 2> dims{img.width, img.height};
  png_image_free(&img);
  return dims;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG encoding failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (std::size_t y = 0; y < image.height; ++y)
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + 3 * y * image.width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace cost
