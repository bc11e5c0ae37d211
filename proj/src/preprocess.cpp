#include "xmt/preprocess.hpp"

#include <array>
#include <cmath>

#include "json.hpp"

namespace xmt {

AffineTransform2D AffineTransform2D::inverse() const {
  const double det_value = det();
  if (det_value == 0.0 || !std::isfinite(det_value)) throw DomainError("affine transform is singular");
  AffineTransform2D inv;
  inv.a = d / det_value;
  inv.b = -b / det_value;
  inv.c = -c / det_value;
  inv.d = a / det_value;
  inv.tx = -(inv.a * tx + inv.b * ty);
  inv.ty = -(inv.c * tx + inv.d * ty);
  return inv;
}

AffineTransform2D compose(const AffineTransform2D& o, const AffineTransform2D& i) {
  return {o.a * i.a + o.b * i.c, o.a * i.b + o.b * i.d, o.a * i.tx + o.b * i.ty + o.tx,
          o.c * i.a + o.d * i.c, o.c * i.b + o.d * i.d, o.c * i.tx + o.d * i.ty + o.ty};
}

// ---------------------------------------------------------------------------
// Downsampling

std::pair<int, int> downsampled_dims(int width, int height, double factor) {
  if (!(factor >= 1.0) || !std::isfinite(factor)) throw DomainError("downsample factor must be >= 1");
  if (width < 1 || height < 1) throw ShapeError("downsample: empty image");
  const int w = std::max(1, static_cast<int>(std::lround(width / factor)));
  const int h = std::max(1, static_cast<int>(std::lround(height / factor)));
  return {w, h};
}

namespace {

struct Span1D {
  int first = 0;
  std::vector<double> weights;  // sum to 1
};

// Overlap of each output cell [o*s, (o+1)*s) with the unit source cells.
std::vector<Span1D> box_weights(int in, int out) {
  const double s = static_cast<double>(in) / out;
  std::vector<Span1D> spans(out);
  for (int o = 0; o < out; ++o) {
    const double lo = o * s;
    const double hi = o + 1 == out ? in : (o + 1) * s;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(in - 1, static_cast<int>(std::ceil(hi)) - 1);
    spans[o].first = first;
    for (int i = first; i <= last; ++i) {
      const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
      spans[o].weights.push_back(std::max(0.0, overlap) / (hi - lo));
    }
  }
  return spans;
}

}  // namespace

FloatImage box_resize(const FloatImage& img, int width, int height) {
  if (img.width == width && img.height == height) return img;
  const auto wx = box_weights(img.width, width);
  const auto wy = box_weights(img.height, height);
  FloatImage rows(width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int ch = 0; ch < img.channels; ++ch) {
        double acc = 0.0;
        for (std::size_t k = 0; k < wx[x].weights.size(); ++k) {
          acc += wx[x].weights[k] * img.at(wx[x].first + static_cast<int>(k), y, ch);
        }
        rows.at(x, y, ch) = acc;
      }
    }
  }
  FloatImage out(width, height, img.channels);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int ch = 0; ch < img.channels; ++ch) {
        double acc = 0.0;
        for (std::size_t k = 0; k < wy[y].weights.size(); ++k) {
          acc += wy[y].weights[k] * rows.at(x, wy[y].first + static_cast<int>(k), ch);
        }
        out.at(x, y, ch) = acc;
      }
    }
  }
  return out;
}

FloatImage downsample(const FloatImage& img, double factor) {
  const auto [w, h] = downsampled_dims(img.width, img.height, factor);
  return box_resize(img, w, h);
}

Raster downsample(const Raster& img, double factor) {
  const auto [w, h] = downsampled_dims(img.width, img.height, factor);
  if (w == img.width && h == img.height) return img;
  return to_raster(box_resize(to_float(img), w, h));
}

// ---------------------------------------------------------------------------
// Warping

namespace {

double sample_zero(const FloatImage& img, double x, double y, int ch) {
  if (!(x > -1.0 && y > -1.0 && x < img.width && y < img.height)) return 0.0;
  const double fx = std::floor(x), fy = std::floor(y);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const double wx = x - fx, wy = y - fy;
  auto px = [&](int xi, int yi) {
    return (xi < 0 || yi < 0 || xi >= img.width || yi >= img.height) ? 0.0 : img.at(xi, yi, ch);
  };
  double v = px(x0, y0) * (1.0 - wx) * (1.0 - wy);
  if (wx != 0.0) v += px(x0 + 1, y0) * wx * (1.0 - wy);
  if (wy != 0.0) v += px(x0, y0 + 1) * (1.0 - wx) * wy;
  if (wx != 0.0 && wy != 0.0) v += px(x0 + 1, y0 + 1) * wx * wy;
  return v;
}

}  // namespace

FloatImage warp(const FloatImage& moving, const AffineTransform2D& t, int out_w, int out_h) {
  const AffineTransform2D inv = t.inverse();
  FloatImage out(out_w, out_h, moving.channels);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const auto [sx, sy] = inv.apply(x, y);
      for (int ch = 0; ch < moving.channels; ++ch) out.at(x, y, ch) = sample_zero(moving, sx, sy, ch);
    }
  }
  return out;
}

Raster warp(const Raster& moving, const AffineTransform2D& t, int out_w, int out_h) {
  return to_raster(warp(to_float(moving), t, out_w, out_h));
}

// ---------------------------------------------------------------------------
// Masks

int otsu_threshold(const Raster& img) {
  const Raster gray = to_gray(img);
  std::array<double, 256> hist{};
  for (auto v : gray.pixels) hist[v] += 1.0;
  const double total = static_cast<double>(gray.pixels.size());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];

  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_k = -1;
  for (int k = 0; k < 255; ++k) {
    w0 += hist[k];
    sum0 += k * hist[k];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = sum0 / w0, mu1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {
      best = between;
      best_k = k;
    }
  }
  if (best_k < 0) throw DomainError("otsu threshold is undefined for a constant image");
  return best_k + 1;
}

Mask threshold_mask(const Raster& img, ThresholdMethod method) {
  const Raster gray = to_gray(img);
  const int t = method.kind == ThresholdMethod::Kind::otsu ? otsu_threshold(gray) : method.level;
  Mask m(gray.width, gray.height, 1);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) m.pixels[i] = gray.pixels[i] >= t ? 1 : 0;
  return m;
}

double dice(const Mask& a, const Mask& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw ShapeError("dice: mask dimensions differ");
  }
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const bool x = a.pixels[i] != 0, y = b.pixels[i] != 0;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

// ---------------------------------------------------------------------------
// Registration

std::string to_string(Similarity s) { return s == Similarity::mse ? "mse" : "ncc"; }

Similarity similarity_from_string(const std::string& name) {
  if (name == "ncc") return Similarity::ncc;
  if (name == "mse") return Similarity::mse;
  throw ConfigError("unknown similarity '" + name + "' (expected ncc or mse)");
}

void RegistrationConfig::validate() const {
  if (levels.empty() || levels.back() != 1) throw ConfigError("registration levels must end with 1");
  for (std::size_t i = 1; i < levels.size(); ++i) {
    if (levels[i] >= levels[i - 1]) throw ConfigError("registration levels must be strictly decreasing");
  }
  if (max_iterations < 1) throw ConfigError("registration max_iterations must be >= 1");
  if (!(tolerance > 0)) throw ConfigError("registration tolerance must be > 0");
}

namespace {

FloatImage unit_gray(const Raster& img) {
  const Raster gray = to_gray(img);
  FloatImage out(gray.width, gray.height, 1);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) out.pixels[i] = gray.pixels[i] / 255.0;
  return out;
}

struct Blob {
  double cx = 0.0, cy = 0.0, area = 0.0;
};

Blob foreground_blob(const Raster& img) {
  Blob b{(img.width - 1) / 2.0, (img.height - 1) / 2.0, static_cast<double>(img.width) * img.height};
  Mask m;
  try {
    m = threshold_mask(img);
  } catch (const DomainError&) {
    return b;
  }
  double sx = 0.0, sy = 0.0, n = 0.0;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (m.at(x, y) == 0) continue;
      sx += x;
      sy += y;
      n += 1.0;
    }
  }
  if (n > 0) b = {sx / n, sy / n, n};
  return b;
}

// Level grid -> full-resolution pixel coordinates.
AffineTransform2D level_to_full(int full_w, int full_h, int lw, int lh) {
  const double sx = static_cast<double>(full_w) / lw, sy = static_cast<double>(full_h) / lh;
  return {sx, 0.0, 0.5 * (sx - 1.0), 0.0, sy, 0.5 * (sy - 1.0)};
}

struct AffineParams {
  Blob moving, fixed;
  double scale0 = 1.0;

  AffineTransform2D transform(const std::vector<double>& p) const {
    const double ct = std::cos(p[2]), st = std::sin(p[2]);
    const double sx = std::exp(p[3]) * scale0, sy = std::exp(p[4]) * scale0, sh = p[5];
    // R * [1 sh; 0 1] * diag(sx, sy)
    const double a = ct * sx, b = (ct * sh - st) * sy;
    const double c = st * sx, d = (st * sh + ct) * sy;
    AffineTransform2D t{a, b, 0.0, c, d, 0.0};
    t.tx = fixed.cx + p[0] - (a * moving.cx + b * moving.cy);
    t.ty = fixed.cy + p[1] - (c * moving.cx + d * moving.cy);
    return t;
  }
};

double similarity_cost(const FloatImage& moving, const FloatImage& fixed, const AffineTransform2D& t,
                       Similarity kind) {
  const AffineTransform2D inv = t.inverse();
  const double n = static_cast<double>(fixed.pixels.size());
  double sm = 0.0, sf = 0.0, smm = 0.0, sff = 0.0, smf = 0.0, sq = 0.0;
  for (int y = 0; y < fixed.height; ++y) {
    for (int x = 0; x < fixed.width; ++x) {
      const auto [u, v] = inv.apply(x, y);
      const double m = sample_zero(moving, u, v, 0);
      const double f = fixed.at(x, y);
      sm += m;
      sf += f;
      smm += m * m;
      sff += f * f;
      smf += m * f;
      sq += (m - f) * (m - f);
    }
  }
  if (kind == Similarity::mse) return sq / n;
  const double cov = smf - sm * sf / n;
  const double vm = smm - sm * sm / n, vf = sff - sf * sf / n;
  if (vm <= 1e-12 || vf <= 1e-12) return 1.0;
  return 1.0 - cov / std::sqrt(vm * vf);
}

}  // namespace

RegistrationResult register_affine(const Raster& moving, const Raster& fixed, const RegistrationConfig& cfg) {
  cfg.validate();
  if (moving.empty() || fixed.empty()) throw ShapeError("register: empty image");
  const FloatImage mov = unit_gray(moving), fix = unit_gray(fixed);

  AffineParams model;
  model.moving = foreground_blob(moving);
  model.fixed = foreground_blob(fixed);
  model.scale0 = std::sqrt(model.fixed.area / model.moving.area);

  std::vector<double> p(6, 0.0);
  RegistrationResult result;
  for (const int level : cfg.levels) {
    const auto [mw, mh] = downsampled_dims(mov.width, mov.height, level);
    const auto [fw, fh] = downsampled_dims(fix.width, fix.height, level);
    const FloatImage mov_l = box_resize(mov, mw, mh);
    const FloatImage fix_l = box_resize(fix, fw, fh);
    const AffineTransform2D to_full_m = level_to_full(mov.width, mov.height, mw, mh);
    const AffineTransform2D from_full_f = level_to_full(fix.width, fix.height, fw, fh).inverse();
    auto cost = [&](const std::vector<double>& q) {
      const AffineTransform2D t = model.transform(q);
      if (!(std::abs(t.det()) > 1e-8)) return 1e9;
      return similarity_cost(mov_l, fix_l, compose(from_full_f, compose(t, to_full_m)), cfg.similarity);
    };
    const double s = static_cast<double>(level);
    const std::vector<double> steps{s, s, 0.02 * s, 0.02 * s, 0.02 * s, 0.01 * s};
    auto run = nelder_mead(cost, p, steps, cfg.max_iterations, cfg.tolerance);
    result.iterations += run.iterations;
    // restart from the optimum to escape a collapsed simplex
    auto again = nelder_mead(cost, run.x, steps, cfg.max_iterations, cfg.tolerance);
    result.iterations += again.iterations;
    p = again.value <= run.value ? again.x : run.x;
    result.converged = run.converged && again.converged;
    result.residual = std::min(run.value, again.value);
  }
  result.transform = model.transform(p);

  const Raster warped = warp(to_gray(moving), result.transform, fixed.width, fixed.height);
  try {
    result.dice = dice(threshold_mask(warped), threshold_mask(fixed));
  } catch (const DomainError&) {
    result.dice = 0.0;
  }
  return result;
}

std::string registration_to_json(const RegistrationResult& r) {
  const auto& t = r.transform;
  nlohmann::json j;
  j["matrix"] = {{t.a, t.b, t.tx}, {t.c, t.d, t.ty}};
  j["residual"] = r.residual;
  j["dice"] = r.dice;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  return j.dump(2);
}

}  // namespace xmt
