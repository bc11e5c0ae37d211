#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xmt/errors.hpp"
#include "xmt/image.hpp"

namespace xmt {

/// What to do when the source side is not a multiple of the tile size.
enum class PadPolicy { reject, zero };

std::string to_string(PadPolicy pad);
PadPolicy pad_policy_from_string(const std::string& name);

struct TileEntry {
  int id = 0;
  int row = 0;
  int col = 0;
  int x0 = 0;
  int y0 = 0;

  friend bool operator==(const TileEntry&, const TileEntry&) = default;
};

/// Coordinates of a raster-order, non-overlapping tiling of a source image.
struct TileManifest {
  int source_w = 0;
  int source_h = 0;
  int tile_size = 0;
  PadPolicy pad = PadPolicy::zero;
  std::vector<TileEntry> tiles;

  int cols() const { return (source_w + tile_size - 1) / tile_size; }
  int rows() const { return (source_h + tile_size - 1) / tile_size; }

  /// Checks coverage, non-overlap and id uniqueness.
  void validate() const;

  friend bool operator==(const TileManifest&, const TileManifest&) = default;
};

TileManifest make_manifest(int source_w, int source_h, int tile_size, PadPolicy pad);

std::string manifest_to_json(const TileManifest& m);
TileManifest manifest_from_json(const std::string& text);

/// `<stem>_r<row>_c<col>.png`
std::string tile_file_name(const std::string& stem, int row, int col);

template <class T>
struct Tile {
  int id = 0;
  Image<T> image;
};

template <class T>
struct Tiling {
  std::vector<Tile<T>> tiles;
  TileManifest manifest;
};

/// Cuts `img` into tile_size x tile_size tiles in raster order. Under the zero
/// policy, tiles reaching past the border are filled with T{}.
template <class T>
Tiling<T> tile_image(const Image<T>& img, int tile_size, PadPolicy pad) {
  if (img.empty()) throw ShapeError("tile: empty image");
  Tiling<T> out;
  out.manifest = make_manifest(img.width, img.height, tile_size, pad);
  out.tiles.reserve(out.manifest.tiles.size());
  for (const auto& e : out.manifest.tiles) {
    Image<T> t(tile_size, tile_size, img.channels);
    const int w = std::min(tile_size, img.width - e.x0);
    const int h = std::min(tile_size, img.height - e.y0);
    for (int y = 0; y < h; ++y) {
      auto src = img.pixels.begin() + static_cast<std::ptrdiff_t>(img.index(e.x0, e.y0 + y));
      std::copy(src, src + static_cast<std::ptrdiff_t>(w) * img.channels,
                t.pixels.begin() + static_cast<std::ptrdiff_t>(t.index(0, y)));
    }
    out.tiles.push_back({e.id, std::move(t)});
  }
  return out;
}

/// Reassembles tiles (in any order) at their manifest coordinates and crops
/// padding. Tiles may have a channel count different from the source.
template <class T>
Image<T> stitch(std::span<const Tile<T>> tiles, const TileManifest& manifest) {
  manifest.validate();
  const std::size_t n = manifest.tiles.size();
  std::vector<const Tile<T>*> by_entry(n, nullptr);
  auto entry_of = [&](int id) -> std::size_t {
    for (std::size_t i = 0; i < n; ++i) {
      if (manifest.tiles[i].id == id) return i;
    }
    throw FormatError("stitch: tile_id " + std::to_string(id) + " is not in the manifest");
  };
  int channels = 0;
  for (const auto& t : tiles) {
    const std::size_t k = entry_of(t.id);
    if (by_entry[k] != nullptr) throw FormatError("stitch: duplicate tile_id " + std::to_string(t.id));
    if (t.image.width != manifest.tile_size || t.image.height != manifest.tile_size) {
      throw ShapeError("stitch: tile_id " + std::to_string(t.id) + " is not " + std::to_string(manifest.tile_size) +
                       " pixels square");
    }
    if (channels == 0) channels = t.image.channels;
    if (t.image.channels != channels) throw ShapeError("stitch: tiles disagree on channel count");
    by_entry[k] = &t;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (by_entry[i] == nullptr) throw FormatError("stitch: missing tile_id " + std::to_string(manifest.tiles[i].id));
  }
  Image<T> out(manifest.source_w, manifest.source_h, channels);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = manifest.tiles[i];
    const auto& img = by_entry[i]->image;
    const int w = std::min(manifest.tile_size, manifest.source_w - e.x0);
    const int h = std::min(manifest.tile_size, manifest.source_h - e.y0);
    for (int y = 0; y < h; ++y) {
      auto src = img.pixels.begin() + static_cast<std::ptrdiff_t>(img.index(0, y));
      std::copy(src, src + static_cast<std::ptrdiff_t>(w) * channels,
                out.pixels.begin() + static_cast<std::ptrdiff_t>(out.index(e.x0, e.y0 + y)));
    }
  }
  return out;
}

template <class T>
Image<T> stitch(const std::vector<Tile<T>>& tiles, const TileManifest& manifest) {
  return stitch(std::span<const Tile<T>>(tiles), manifest);
}

}  // namespace xmt
