#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xmt/image.hpp"
#include "xmt/training.hpp"

namespace xmt {

/// Blurred, low-contrast gray shape (the "MRI") and the same shape rendered
/// sharp with a stain-like texture on a light background (the "histology").
struct SyntheticPair {
  Raster mri;
  Raster histology;
};

SyntheticPair synthetic_pair(std::uint64_t seed, std::uint64_t index, int size = 64);

struct SyntheticTask {
  std::vector<SyntheticPair> train;
  std::vector<SyntheticPair> test;
};

SyntheticTask make_synthetic_task(std::uint64_t seed = 0, int size = 64, int n_train = 64, int n_test = 16);

std::vector<SamplePair> to_samples(std::span<const SyntheticPair> pairs);

/// Asymmetric textured blob on a dark background, for registration trials.
Raster textured_phantom(int size = 128);

}  // namespace xmt
