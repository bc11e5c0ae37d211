#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "json.hpp"
#include "xmt/metrics.hpp"
#include "xmt/png_io.hpp"
#include "xmt/rng.hpp"
#include "xmt/synthetic.hpp"

using namespace xmt;

namespace {

Raster noisy(const Raster& img, double sigma, RngStream& rng) {
  Raster out = img;
  for (auto& p : out.pixels) p = clamp_to_byte(p + 255.0 * sigma * rng.normal());
  return out;
}

std::vector<Raster> shapes(int n, std::uint64_t seed) {
  std::vector<Raster> out;
  for (int i = 0; i < n; ++i) out.push_back(synthetic_pair(seed, static_cast<std::uint64_t>(i), 64).histology);
  return out;
}

GaussianStats stats_1d(double mu, double var) {
  return {Eigen::VectorXd::Constant(1, mu), Eigen::MatrixXd::Constant(1, 1, var)};
}

Eigen::MatrixXd random_psd(int d, int rank, RngStream& rng) {
  Eigen::MatrixXd a(d, rank);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < rank; ++j) a(i, j) = rng.normal();
  return a * a.transpose() / rank;
}

Eigen::VectorXd random_vector(int d, RngStream& rng) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.normal();
  return v;
}

}  // namespace

TEST(Extractor, DeterministicAndSized) {
  const auto a = FeatureExtractor::create();
  const auto b = FeatureExtractor::create();
  ASSERT_EQ(a.kernels.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(bit_equal(a.kernels[i], b.kernels[i]));
  EXPECT_EQ(a.feature_dim(), 64);
  EXPECT_EQ(a.kernels[0].shape(), (Shape{16, 3, 4, 4}));
}

TEST(Extractor, FeatureRows) {
  const auto fx = FeatureExtractor::create();
  auto imgs = shapes(3, 1);
  imgs.push_back(imgs[0]);
  const Eigen::MatrixXd f = extract_features(fx, imgs);
  EXPECT_EQ(f.rows(), 4);
  EXPECT_EQ(f.cols(), 64);
  EXPECT_EQ(f.row(0), f.row(3));
  EXPECT_NE(f.row(0), f.row(1));
  EXPECT_THROW(extract_features(fx, std::vector<Raster>{}), Error);
}

TEST(Extractor, PngRoundTripKeepsFeatures) {
  const auto fx = FeatureExtractor::create();
  const auto imgs = shapes(2, 2);
  std::vector<Raster> decoded;
  for (const auto& r : imgs) decoded.push_back(decode_png(encode_png(r)));
  EXPECT_EQ(extract_features(fx, imgs), extract_features(fx, decoded));
}

TEST(Extractor, GrayReplicatedToRgb) {
  const auto fx = FeatureExtractor::create();
  const Raster gray = synthetic_pair(3, 0, 64).mri;
  EXPECT_TRUE(bit_equal(extractor_input(fx, gray), extractor_input(fx, to_rgb(gray))));
}

TEST(GaussianStats, HandValues) {
  Eigen::MatrixXd f(2, 1);
  f << 0, 2;
  const auto s = gaussian_stats(f);
  EXPECT_EQ(s.mu(0), 1.0);
  EXPECT_EQ(s.sigma(0, 0), 2.0);
  Eigen::MatrixXd same(2, 3);
  same << 1, 2, 3, 1, 2, 3;
  EXPECT_EQ(gaussian_stats(same).sigma, Eigen::MatrixXd::Zero(3, 3));
  EXPECT_THROW(gaussian_stats(Eigen::MatrixXd::Ones(1, 3)), Error);
}

TEST(GaussianStats, PermutationInvariantAndSymmetric) {
  RngStream rng(1);
  Eigen::MatrixXd f(6, 4);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) f(i, j) = rng.normal();
  Eigen::MatrixXd p = f;
  p.row(0).swap(p.row(5));
  p.row(2).swap(p.row(3));
  const auto a = gaussian_stats(f), b = gaussian_stats(p);
  EXPECT_LT((a.mu - b.mu).norm(), 1e-14);
  EXPECT_LT((a.sigma - b.sigma).norm(), 1e-14);
  EXPECT_EQ(a.sigma, a.sigma.transpose());
  // Unbiased divisor.
  Eigen::MatrixXd c = f.rowwise() - f.colwise().mean();
  EXPECT_LT((a.sigma - c.transpose() * c / 5.0).norm(), 1e-12);
}

TEST(Frechet, OneDimensionalClosedForm) {
  EXPECT_NEAR(frechet_distance(stats_1d(0, 1), stats_1d(2, 1)), 4.0, 1e-9);
  EXPECT_NEAR(frechet_distance(stats_1d(0, 1), stats_1d(0, 4)), 1.0, 1e-9);
  RngStream rng(2);
  for (int i = 0; i < 200; ++i) {
    const double m1 = 4 * rng.normal(), m2 = 4 * rng.normal();
    const double s1 = 0.01 + 3 * rng.uniform(), s2 = 0.01 + 3 * rng.uniform();
    const double expect = (m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2);
    EXPECT_NEAR(frechet_distance(stats_1d(m1, s1 * s1), stats_1d(m2, s2 * s2)), expect, 1e-9);
  }
}

TEST(Frechet, SelfZeroSymmetricNonnegative) {
  RngStream rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + static_cast<int>(rng.below(12));
    const int r1 = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(d)));
    const int r2 = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(d)));
    GaussianStats a{random_vector(d, rng), random_psd(d, r1, rng)};
    GaussianStats b{random_vector(d, rng), random_psd(d, r2, rng)};
    EXPECT_NEAR(frechet_distance(a, a), 0.0, 1e-6);
    const double ab = frechet_distance(a, b), ba = frechet_distance(b, a);
    EXPECT_NEAR(ab, ba, 1e-6);
    EXPECT_GE(ab, 0.0);
  }
}

TEST(Frechet, CommutingCovariancesClosedForm) {
  // Diagonal covariances commute: Tr term is sum (sqrt(a) - sqrt(b))^2.
  RngStream rng(4);
  const int d = 10;
  Eigen::VectorXd va(d), vb(d);
  double expect = 0.0;
  for (int i = 0; i < d; ++i) {
    va(i) = 0.1 + rng.uniform();
    vb(i) = 0.1 + rng.uniform();
    expect += std::pow(std::sqrt(va(i)) - std::sqrt(vb(i)), 2);
  }
  const GaussianStats a{Eigen::VectorXd::Zero(d), va.asDiagonal()};
  const GaussianStats b{Eigen::VectorXd::Zero(d), vb.asDiagonal()};
  EXPECT_NEAR(frechet_distance(a, b), expect, 1e-9);
}

TEST(Frechet, DimensionMismatch) {
  EXPECT_THROW(frechet_distance(stats_1d(0, 1), GaussianStats{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)}),
               ShapeError);
}

TEST(Fid, SelfSymmetricAndMonotone) {
  const auto fx = FeatureExtractor::create();
  const auto a = shapes(6, 5);
  RngStream rng(6);
  std::vector<Raster> tiny, heavy;
  for (const auto& r : a) {
    tiny.push_back(noisy(r, 0.01, rng));
    heavy.push_back(noisy(r, 0.3, rng));
  }
  EXPECT_NEAR(fid(a, a, fx), 0.0, 1e-6);
  EXPECT_NEAR(fid(a, heavy, fx), fid(heavy, a, fx), 1e-6);
  EXPECT_GT(fid(a, heavy, fx), fid(a, tiny, fx));
  EXPECT_THROW(fid(std::vector<Raster>{a[0]}, a, fx), Error);
}

TEST(Fid, ThreeImageSetsAreFinite) {
  const auto fx = FeatureExtractor::create();
  const auto a = shapes(3, 7), b = shapes(3, 8);
  const double v = fid(a, b, fx);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GE(v, 0.0);
}

TEST(Perceptual, IdentitySymmetryMonotone) {
  const auto fx = FeatureExtractor::create();
  const Raster a = synthetic_pair(9, 0, 64).histology;
  const Raster b = synthetic_pair(9, 1, 64).histology;
  EXPECT_EQ(perceptual_distance(a, a, fx), 0.0);
  EXPECT_EQ(perceptual_distance(a, b, fx), perceptual_distance(b, a, fx));
  RngStream rng(10);
  EXPECT_GT(perceptual_distance(a, noisy(a, 0.3, rng), fx), perceptual_distance(a, noisy(a, 0.05, rng), fx));
  EXPECT_THROW(perceptual_distance(a, Raster(32, 32, 3), fx), ShapeError);
}

TEST(L1Distance, UnitScale) {
  EXPECT_EQ(l1_distance(Raster(4, 4, 3, 0), Raster(4, 4, 3, 255)), 2.0);
  EXPECT_EQ(l1_distance(Raster(4, 4, 1, 10), Raster(4, 4, 3, 10)), 0.0);
}

TEST(EvaluatePairs, IdenticalSetsAndReport) {
  const auto fx = FeatureExtractor::create();
  const auto a = shapes(4, 11);
  const MetricReport r = evaluate_pairs(a, a, "generated-vs-real-histology", fx);
  EXPECT_NEAR(r.fid, 0.0, 1e-6);
  EXPECT_EQ(r.lpips_mean, 0.0);
  EXPECT_EQ(r.l1_mean, 0.0);
  EXPECT_EQ(r.n_images, 4);
  std::vector<Raster> mri;
  for (int i = 0; i < 4; ++i) mri.push_back(synthetic_pair(11, static_cast<std::uint64_t>(i), 64).mri);
  const MetricReport m = evaluate_pairs(a, mri, "generated-vs-real-MRI", fx);
  const std::vector<MetricReport> both{r, m};
  const auto j = nlohmann::json::parse(report_to_json(both));
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0].at("comparison"), "generated-vs-real-histology");
  EXPECT_EQ(j[1].at("comparison"), "generated-vs-real-MRI");
  for (const auto& row : j) {
    for (const char* key : {"fid", "lpips_mean", "l1_mean", "n_images", "extractor_seed", "notes"})
      EXPECT_TRUE(row.contains(key)) << key;
    EXPECT_GE(row.at("fid").get<double>(), 0.0);
  }
  EXPECT_NE(j[0].at("notes").get<std::string>().find("proxy-FID"), std::string::npos);
  EXPECT_THROW(evaluate_pairs(a, std::span(a).first(3), "x", fx), Error);
}

TEST(Metrics, Deterministic) {
  const auto a = shapes(3, 12), b = shapes(3, 13);
  EXPECT_EQ(fid(a, b, FeatureExtractor::create()), fid(a, b, FeatureExtractor::create()));
}
