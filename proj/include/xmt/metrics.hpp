#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xmt/image.hpp"
#include "xmt/tensor.hpp"

namespace xmt {

inline constexpr std::uint64_t kExtractorSeed = 0x46454154u;  // "FEAT"

/// Fixed random convolutional stack standing in for a pretrained network:
/// three 4x4 stride-2 conv + leaky ReLU stages, 3 -> 16 -> 32 -> 64 channels.
struct FeatureExtractor {
  std::uint64_t seed = kExtractorSeed;
  int input_side = 64;
  std::vector<Tensor> kernels;

  static FeatureExtractor create(std::uint64_t seed = kExtractorSeed, int input_side = 64);
  int feature_dim() const { return static_cast<int>(kernels.back().dim(0)); }
};

/// Gray input is replicated to RGB, resized to the input side and mapped to [-1, 1].
Tensor extractor_input(const FeatureExtractor& fx, const Raster& img);

/// Per-stage feature maps (1 x C x H x W each).
std::vector<Tensor> feature_maps(const FeatureExtractor& fx, const Raster& img);

/// n x 64 matrix of globally average-pooled final-stage features.
Eigen::MatrixXd extract_features(const FeatureExtractor& fx, std::span<const Raster> images);

struct GaussianStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
};

/// Sample mean and unbiased covariance; needs at least two rows.
GaussianStats gaussian_stats(const Eigen::MatrixXd& features);

/// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2).
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

double fid(std::span<const Raster> a, std::span<const Raster> b, const FeatureExtractor& fx);

/// Sum over stages of the spatial mean of squared differences between
/// channel-normalized feature vectors.
double perceptual_distance(const Raster& a, const Raster& b, const FeatureExtractor& fx);

/// Mean absolute difference in [-1, 1] units after RGB replication.
double l1_distance(const Raster& a, const Raster& b);

struct MetricReport {
  std::string comparison;
  double fid = 0.0;
  double lpips_mean = 0.0;
  double l1_mean = 0.0;
  int n_images = 0;
  std::uint64_t extractor_seed = kExtractorSeed;
  std::string notes = "proxy-FID and proxy-LPIPS from a fixed seeded extractor; not comparable to Inception/LPIPS values";
};

/// Pairs generated[i] with reference[i].
MetricReport evaluate_pairs(std::span<const Raster> generated, std::span<const Raster> reference,
                            const std::string& comparison, const FeatureExtractor& fx);

std::string report_to_json(std::span<const MetricReport> reports);

}  // namespace xmt
