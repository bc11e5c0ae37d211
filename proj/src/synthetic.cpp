#include "xmt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xmt/rng.hpp"

namespace xmt {

namespace {

struct Ellipse {
  double cx, cy, rx, ry, angle;

  bool contains(double x, double y) const {
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = (x - cx) * c + (y - cy) * s, v = -(x - cx) * s + (y - cy) * c;
    return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
  }
};

std::vector<double> box_blur(const std::vector<double>& src, int size, int radius) {
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += src[y * size + std::clamp(x + k, 0, size - 1)];
      tmp[y * size + x] = acc / (2 * radius + 1);
    }
  }
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += tmp[std::clamp(y + k, 0, size - 1) * size + x];
      out[y * size + x] = acc / (2 * radius + 1);
    }
  }
  return out;
}

}  // namespace

SyntheticPair synthetic_pair(std::uint64_t seed, std::uint64_t index, int size) {
  RngStream rng = RngStream(seed).derive(index);
  const double s = size;
  const Ellipse e{s * (0.35 + 0.3 * rng.uniform()), s * (0.35 + 0.3 * rng.uniform()), s * (0.18 + 0.14 * rng.uniform()),
                  s * (0.18 + 0.14 * rng.uniform()), std::numbers::pi * rng.uniform()};
  const double phase = 2.0 * std::numbers::pi * rng.uniform();

  std::vector<double> mask(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) mask[y * size + x] = e.contains(x, y) ? 1.0 : 0.0;
  }
  const auto soft = box_blur(box_blur(mask, size, 2), size, 2);

  SyntheticPair p{Raster(size, size, 1), Raster(size, size, 3)};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * size + x;
      p.mri.at(x, y) = clamp_to_byte(80.0 + 60.0 * soft[i] + 2.0 * rng.normal());
      if (mask[i] == 0.0) {
        p.histology.at(x, y, 0) = 236;
        p.histology.at(x, y, 1) = 228;
        p.histology.at(x, y, 2) = 232;
        continue;
      }
      const double t = 0.5 + 0.5 * std::sin(0.9 * x + 0.4 * y + phase) * std::cos(0.5 * y - 0.3 * x);
      p.histology.at(x, y, 0) = clamp_to_byte(110.0 + 70.0 * t);
      p.histology.at(x, y, 1) = clamp_to_byte(45.0 + 50.0 * t);
      p.histology.at(x, y, 2) = clamp_to_byte(95.0 + 60.0 * t);
    }
  }
  return p;
}

SyntheticTask make_synthetic_task(std::uint64_t seed, int size, int n_train, int n_test) {
  SyntheticTask task;
  for (int i = 0; i < n_train; ++i) task.train.push_back(synthetic_pair(seed, static_cast<std::uint64_t>(i), size));
  for (int i = 0; i < n_test; ++i) {
    task.test.push_back(synthetic_pair(seed, static_cast<std::uint64_t>(n_train + i), size));
  }
  return task;
}

std::vector<SamplePair> to_samples(std::span<const SyntheticPair> pairs) {
  std::vector<SamplePair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({raster_to_tensor(p.mri), raster_to_tensor(p.histology), std::nullopt});
  return out;
}

Raster textured_phantom(int size) {
  Raster img(size, size, 1);
  const double s = size;
  const Ellipse body{0.48 * s, 0.52 * s, 0.30 * s, 0.20 * s, 0.35};
  const Ellipse lobe{0.66 * s, 0.34 * s, 0.10 * s, 0.07 * s, -0.6};
  const Ellipse hole{0.40 * s, 0.55 * s, 0.07 * s, 0.05 * s, 0.0};
  constexpr int kSuper = 4;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double acc = 0.0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double u = x + (sx + 0.5) / kSuper - 0.5, v = y + (sy + 0.5) / kSuper - 0.5;
          if (!(body.contains(u, v) || lobe.contains(u, v))) continue;
          if (hole.contains(u, v)) {
            acc += 60.0;
            continue;
          }
          acc += 150.0 + 60.0 * std::sin(0.35 * u) * std::cos(0.27 * v);
        }
      }
      img.at(x, y) = clamp_to_byte(acc / (kSuper * kSuper));
    }
  }
  return img;
}

}  // namespace xmt
