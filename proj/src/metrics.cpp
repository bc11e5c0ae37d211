#include "xmt/metrics.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "json.hpp"
#include "xmt/parallel.hpp"
#include "xmt/rng.hpp"

namespace xmt {

FeatureExtractor FeatureExtractor::create(std::uint64_t seed, int input_side) {
  if (input_side < 8 || input_side % 8 != 0) throw ConfigError("extractor input side must be a multiple of 8");
  FeatureExtractor fx;
  fx.seed = seed;
  fx.input_side = input_side;
  RngStream rng(seed);
  const int widths[] = {3, 16, 32, 64};
  for (int s = 0; s < 3; ++s) {
    const int cin = widths[s], cout = widths[s + 1];
    const double std_dev = std::sqrt(2.0 / (cin * 16));
    std::vector<double> w(static_cast<std::size_t>(cout) * cin * 16);
    for (auto& v : w) v = rng.normal() * std_dev;
    fx.kernels.emplace_back(Shape{cout, cin, 4, 4}, std::move(w));
  }
  return fx;
}

Tensor extractor_input(const FeatureExtractor& fx, const Raster& img) {
  if (img.empty()) throw ShapeError("feature extraction: empty image");
  FloatImage f = resize_bilinear(to_float(to_rgb(img)), fx.input_side, fx.input_side);
  for (auto& v : f.pixels) v = v / 127.5 - 1.0;
  return image_to_tensor(f);
}

std::vector<Tensor> feature_maps(const FeatureExtractor& fx, const Raster& img) {
  std::vector<Tensor> maps;
  Tensor h = extractor_input(fx, img);
  for (const auto& k : fx.kernels) {
    h = leaky_relu(conv2d(h, k, 2, 1), 0.2);
    maps.push_back(h);
  }
  return maps;
}

Eigen::MatrixXd extract_features(const FeatureExtractor& fx, std::span<const Raster> images) {
  if (images.empty()) throw ShapeError("feature extraction: empty image set");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), fx.feature_dim());
  parallel_for(images.size(), [&](std::size_t i) {
    const Tensor last = feature_maps(fx, images[i]).back();
    const auto v = last.values();
    const std::int64_t c = last.dim(1), plane = last.dim(2) * last.dim(3);
    for (std::int64_t k = 0; k < c; ++k) {
      double acc = 0.0;
      for (std::int64_t p = 0; p < plane; ++p) acc += v[static_cast<std::size_t>(k * plane + p)];
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = acc / static_cast<double>(plane);
    }
  });
  return out;
}

GaussianStats gaussian_stats(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) throw ShapeError("gaussian_stats: need at least 2 samples");
  GaussianStats s;
  s.mu = features.colwise().mean().transpose();
  const Eigen::MatrixXd centred = features.rowwise() - s.mu.transpose();
  s.sigma = centred.transpose() * centred / static_cast<double>(features.rows() - 1);
  s.sigma = 0.5 * (s.sigma + s.sigma.transpose()).eval();
  return s;
}

namespace {

// Symmetric PSD square root; eigenvalues below -tol are rejected.
std::optional<Eigen::MatrixXd> psd_sqrt(const Eigen::MatrixXd& m, double tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) return std::nullopt;
  Eigen::VectorXd ev = es.eigenvalues();
  if (ev.size() > 0 && ev.minCoeff() < -tol) throw DomainError("covariance is not positive semi-definite");
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

std::optional<double> trace_sqrt_product(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2, double tol) {
  const auto r1 = psd_sqrt(s1, tol);
  if (!r1) return std::nullopt;
  Eigen::MatrixXd inner = *r1 * s2 * *r1;
  inner = 0.5 * (inner + inner.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return std::nullopt;
  if (es.eigenvalues().size() > 0 && es.eigenvalues().minCoeff() < -tol) {
    throw DomainError("covariance product is not positive semi-definite");
  }
  return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mu.size() != b.mu.size() || a.sigma.rows() != a.mu.size() || a.sigma.cols() != a.mu.size() ||
      b.sigma.rows() != b.mu.size() || b.sigma.cols() != b.mu.size()) {
    throw ShapeError("frechet_distance: dimension mismatch");
  }
  const double scale = std::max({1.0, a.sigma.cwiseAbs().maxCoeff(), b.sigma.cwiseAbs().maxCoeff()});
  const double tol = 1e-6 * scale;
  const double mean_term = (a.mu - b.mu).squaredNorm();
  double tr_sqrt = 0.0;
  double extra = 0.0;
  if (auto t = trace_sqrt_product(a.sigma, b.sigma, tol)) {
    tr_sqrt = *t;
  } else {
    // eigen solve failed: retry on jittered covariances
    const Eigen::Index n = a.mu.size();
    const Eigen::MatrixXd jitter = 1e-6 * Eigen::MatrixXd::Identity(n, n);
    auto retry = trace_sqrt_product(a.sigma + jitter, b.sigma + jitter, tol);
    if (!retry) throw DomainError("frechet_distance: eigen decomposition failed");
    tr_sqrt = *retry;
    extra = 2e-6 * static_cast<double>(n);
  }
  double d = mean_term + a.sigma.trace() + b.sigma.trace() + extra - 2.0 * tr_sqrt;
  if (d < 0.0) {
    if (d < -tol) throw DomainError("frechet_distance: negative result " + std::to_string(d));
    d = 0.0;
  }
  return d;
}

double fid(std::span<const Raster> a, std::span<const Raster> b, const FeatureExtractor& fx) {
  if (a.size() < 2 || b.size() < 2) throw ShapeError("fid: each set needs at least 2 images");
  return frechet_distance(gaussian_stats(extract_features(fx, a)), gaussian_stats(extract_features(fx, b)));
}

double perceptual_distance(const Raster& a, const Raster& b, const FeatureExtractor& fx) {
  if (a.width != b.width || a.height != b.height) throw ShapeError("perceptual_distance: image dimensions differ");
  const auto fa = feature_maps(fx, a);
  const auto fb = feature_maps(fx, b);
  double total = 0.0;
  for (std::size_t s = 0; s < fa.size(); ++s) {
    const auto va = fa[s].values(), vb = fb[s].values();
    const std::int64_t c = fa[s].dim(1), plane = fa[s].dim(2) * fa[s].dim(3);
    double stage = 0.0;
    for (std::int64_t p = 0; p < plane; ++p) {
      double na = 0.0, nb = 0.0;
      for (std::int64_t k = 0; k < c; ++k) {
        const auto i = static_cast<std::size_t>(k * plane + p);
        na += va[i] * va[i];
        nb += vb[i] * vb[i];
      }
      na = std::sqrt(na) + 1e-10;
      nb = std::sqrt(nb) + 1e-10;
      for (std::int64_t k = 0; k < c; ++k) {
        const auto i = static_cast<std::size_t>(k * plane + p);
        const double diff = va[i] / na - vb[i] / nb;
        stage += diff * diff;
      }
    }
    total += stage / static_cast<double>(plane);
  }
  return total;
}

double l1_distance(const Raster& a, const Raster& b) {
  if (a.width != b.width || a.height != b.height) throw ShapeError("l1: image dimensions differ");
  const Raster ra = to_rgb(a), rb = to_rgb(b);
  double acc = 0.0;
  for (std::size_t i = 0; i < ra.pixels.size(); ++i) {
    acc += std::abs(byte_to_unit(ra.pixels[i]) - byte_to_unit(rb.pixels[i]));
  }
  return acc / static_cast<double>(ra.pixels.size());
}

MetricReport evaluate_pairs(std::span<const Raster> generated, std::span<const Raster> reference,
                            const std::string& comparison, const FeatureExtractor& fx) {
  if (generated.size() != reference.size()) {
    throw ShapeError("evaluate: " + std::to_string(generated.size()) + " generated images but " +
                     std::to_string(reference.size()) + " references");
  }
  if (generated.empty()) throw ShapeError("evaluate: no images");
  MetricReport r;
  r.comparison = comparison;
  r.n_images = static_cast<int>(generated.size());
  r.extractor_seed = fx.seed;
  std::vector<double> lp(generated.size()), l1(generated.size());
  parallel_for(generated.size(), [&](std::size_t i) {
    lp[i] = perceptual_distance(generated[i], reference[i], fx);
    l1[i] = l1_distance(generated[i], reference[i]);
  });
  for (std::size_t i = 0; i < lp.size(); ++i) {
    r.lpips_mean += lp[i];
    r.l1_mean += l1[i];
  }
  r.lpips_mean /= static_cast<double>(lp.size());
  r.l1_mean /= static_cast<double>(l1.size());
  r.fid = fid(generated, reference, fx);
  return r;
}

std::string report_to_json(std::span<const MetricReport> reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    arr.push_back({{"comparison", r.comparison},
                   {"fid", r.fid},
                   {"lpips_mean", r.lpips_mean},
                   {"l1_mean", r.l1_mean},
                   {"n_images", r.n_images},
                   {"extractor_seed", r.extractor_seed},
                   {"notes", r.notes}});
  }
  return arr.dump(2);
}

}  // namespace xmt
