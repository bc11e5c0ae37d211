#include "xmt/dataset.hpp"

#include <algorithm>

#include "xmt/png_io.hpp"

namespace xmt {

std::vector<std::string> png_stems(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<std::string> stems;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") stems.push_back(entry.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

Raster with_channels(const Raster& img, int channels) {
  if (channels == 1) return to_gray(img);
  if (channels == 3) return to_rgb(img);
  throw ConfigError("channel count must be 1 or 3");
}

Tensor raster_to_input(const Raster& img, std::optional<int> size) {
  if (!size || (img.width == *size && img.height == *size)) return raster_to_tensor(img);
  FloatImage f = resize_bilinear(to_float(img), *size, *size);
  for (auto& v : f.pixels) v = v / 127.5 - 1.0;
  return image_to_tensor(f);
}

std::vector<SamplePair> PairedDataset::samples(std::optional<int> load_size) const {
  std::vector<SamplePair> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    out.push_back({raster_to_input(a[i], load_size), raster_to_input(b[i], load_size), stems[i]});
  }
  return out;
}

PairedDataset load_pairs(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b, int in_channels,
                         int out_channels) {
  const auto sa = png_stems(dir_a);
  const auto sb = png_stems(dir_b);
  std::vector<std::string> only_a, only_b;
  std::set_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(only_a));
  std::set_difference(sb.begin(), sb.end(), sa.begin(), sa.end(), std::back_inserter(only_b));
  if (!only_a.empty()) {
    throw FormatError("unmatched stem '" + only_a.front() + "': present in " + dir_a.string() + " but not in " +
                      dir_b.string());
  }
  if (!only_b.empty()) {
    throw FormatError("unmatched stem '" + only_b.front() + "': present in " + dir_b.string() + " but not in " +
                      dir_a.string());
  }
  if (sa.empty()) throw FormatError("no PNG files in '" + dir_a.string() + "'");
  PairedDataset ds;
  ds.stems = sa;
  for (const auto& stem : sa) {
    ds.a.push_back(with_channels(read_png(dir_a / (stem + ".png")), in_channels));
    ds.b.push_back(with_channels(read_png(dir_b / (stem + ".png")), out_channels));
  }
  return ds;
}

}  // namespace xmt
