#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "xmt/errors.hpp"
#include "xmt/tensor.hpp"

namespace xmt {

/// Interleaved (row, column, channel) raster.
template <class T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> pixels;

  Image() = default;
  Image(int w, int h, int c, T fill = T{}) : width(w), height(h), channels(c) {
    if (w < 1 || h < 1 || c < 1) {
      throw ShapeError("image dimensions must be positive, got " + std::to_string(w) + "x" + std::to_string(h) + "x" +
                       std::to_string(c));
    }
    pixels.assign(static_cast<std::size_t>(w) * h * c, fill);
  }

  bool empty() const { return pixels.empty(); }
  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  T& at(int x, int y, int c = 0) { return pixels[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return pixels[index(x, y, c)]; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// 8-bit grayscale (1 channel) or RGB (3 channels).
using Raster = Image<std::uint8_t>;
using FloatImage = Image<double>;

inline std::uint8_t clamp_to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0L, 255L));
}

/// [0, 255] -> [-1, 1].
inline double byte_to_unit(std::uint8_t v) { return static_cast<double>(v) / 127.5 - 1.0; }
/// [-1, 1] -> [0, 255], rounding to nearest; exact inverse of byte_to_unit on the 8-bit grid.
inline std::uint8_t unit_to_byte(double v) { return clamp_to_byte((v + 1.0) / 2.0 * 255.0); }

Raster to_gray(const Raster& img);
Raster to_rgb(const Raster& img);

/// Bilinear resampling with pixel-centre alignment.
FloatImage resize_bilinear(const FloatImage& img, int width, int height);
Raster resize_bilinear(const Raster& img, int width, int height);

FloatImage to_float(const Raster& img);
Raster to_raster(const FloatImage& img);

/// 1 x C x H x W tensor with values in [-1, 1].
Tensor raster_to_tensor(const Raster& img);
/// Sample `index` of an N x C x H x W tensor in [-1, 1] back to bytes.
Raster tensor_to_raster(const Tensor& t, std::int64_t index = 0);

Tensor image_to_tensor(const FloatImage& img);
FloatImage tensor_to_image(const Tensor& t, std::int64_t index = 0);

}  // namespace xmt
