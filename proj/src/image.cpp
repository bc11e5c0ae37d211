#include "xmt/image.hpp"

namespace xmt {

Raster to_gray(const Raster& img) {
  if (img.channels == 1) return img;
  Raster out(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      int acc = 0;
      for (int c = 0; c < img.channels; ++c) acc += img.at(x, y, c);
      out.at(x, y) = clamp_to_byte(static_cast<double>(acc) / img.channels);
    }
  }
  return out;
}

Raster to_rgb(const Raster& img) {
  if (img.channels == 3) return img;
  if (img.channels != 1) throw ShapeError("to_rgb: expected 1 or 3 channels");
  Raster out(img.width, img.height, 3);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    for (int c = 0; c < 3; ++c) out.pixels[i * 3 + c] = img.pixels[i];
  }
  return out;
}

FloatImage resize_bilinear(const FloatImage& img, int width, int height) {
  if (img.width == width && img.height == height) return img;
  FloatImage out(width, height, img.channels);
  const double sx = static_cast<double>(img.width) / width;
  const double sy = static_cast<double>(img.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels; ++c) {
        const double top = img.at(x0, y0, c) * (1 - wx) + img.at(x1, y0, c) * wx;
        const double bottom = img.at(x0, y1, c) * (1 - wx) + img.at(x1, y1, c) * wx;
        out.at(x, y, c) = top * (1 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

FloatImage to_float(const Raster& img) {
  FloatImage out(img.width, img.height, img.channels);
  std::copy(img.pixels.begin(), img.pixels.end(), out.pixels.begin());
  return out;
}

Raster to_raster(const FloatImage& img) {
  Raster out(img.width, img.height, img.channels);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out.pixels[i] = clamp_to_byte(img.pixels[i]);
  return out;
}

Raster resize_bilinear(const Raster& img, int width, int height) {
  if (img.width == width && img.height == height) return img;
  return to_raster(resize_bilinear(to_float(img), width, height));
}

Tensor image_to_tensor(const FloatImage& img) {
  const int c = img.channels;
  const int plane = img.width * img.height;
  std::vector<double> v(img.pixels.size());
  for (int i = 0; i < plane; ++i) {
    for (int k = 0; k < c; ++k) v[static_cast<std::size_t>(k) * plane + i] = img.pixels[static_cast<std::size_t>(i) * c + k];
  }
  return Tensor({1, c, img.height, img.width}, std::move(v));
}

FloatImage tensor_to_image(const Tensor& t, std::int64_t index) {
  if (t.rank() != 4) throw ShapeError("tensor_to_image: expected NCHW tensor, got " + shape_string(t.shape()));
  if (index < 0 || index >= t.dim(0)) throw ShapeError("tensor_to_image: sample index out of range");
  const int c = static_cast<int>(t.dim(1));
  const int h = static_cast<int>(t.dim(2));
  const int w = static_cast<int>(t.dim(3));
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  FloatImage out(w, h, c);
  auto v = t.values();
  const std::size_t base = static_cast<std::size_t>(index) * c * plane;
  for (std::size_t i = 0; i < plane; ++i) {
    for (int k = 0; k < c; ++k) out.pixels[i * c + k] = v[base + k * plane + i];
  }
  return out;
}

Tensor raster_to_tensor(const Raster& img) {
  FloatImage f(img.width, img.height, img.channels);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) f.pixels[i] = byte_to_unit(img.pixels[i]);
  return image_to_tensor(f);
}

Raster tensor_to_raster(const Tensor& t, std::int64_t index) {
  FloatImage f = tensor_to_image(t, index);
  Raster out(f.width, f.height, f.channels);
  for (std::size_t i = 0; i < f.pixels.size(); ++i) out.pixels[i] = unit_to_byte(f.pixels[i]);
  return out;
}

}  // namespace xmt
