#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xmt/image.hpp"
#include "xmt/training.hpp"

namespace xmt {

/// PNG file stems of a directory, sorted.
std::vector<std::string> png_stems(const std::filesystem::path& dir);

struct PairedDataset {
  std::vector<std::string> stems;
  std::vector<Raster> a;  // MRI, gray unless in_channels == 3
  std::vector<Raster> b;  // histology, RGB unless out_channels == 1

  std::size_t size() const { return stems.size(); }
  /// Tensors in [-1, 1]; resized to load_size when given.
  std::vector<SamplePair> samples(std::optional<int> load_size = std::nullopt) const;
};

/// Pairs dir_A/<stem>.png with dir_B/<stem>.png. Any stem present on only one
/// side is an error naming it.
PairedDataset load_pairs(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b, int in_channels = 1,
                         int out_channels = 3);

/// Converts to the requested channel count (1 or 3).
Raster with_channels(const Raster& img, int channels);

Tensor raster_to_input(const Raster& img, std::optional<int> size = std::nullopt);

}  // namespace xmt
