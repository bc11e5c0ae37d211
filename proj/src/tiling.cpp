#include "xmt/tiling.hpp"

#include <set>

#include "json.hpp"

namespace xmt {

std::string to_string(PadPolicy pad) { return pad == PadPolicy::zero ? "zero" : "reject"; }

PadPolicy pad_policy_from_string(const std::string& name) {
  if (name == "zero") return PadPolicy::zero;
  if (name == "reject") return PadPolicy::reject;
  throw ConfigError("unknown pad policy '" + name + "' (expected reject or zero)");
}

TileManifest make_manifest(int source_w, int source_h, int tile_size, PadPolicy pad) {
  if (tile_size < 1) throw ConfigError("tile: tile_size must be >= 1");
  if (source_w < 1 || source_h < 1) throw ShapeError("tile: empty source");
  if (pad == PadPolicy::reject && (source_w % tile_size != 0 || source_h % tile_size != 0)) {
    throw ShapeError("tile: " + std::to_string(source_w) + "x" + std::to_string(source_h) +
                     " is not divisible by tile size " + std::to_string(tile_size) + " (pad policy reject)");
  }
  TileManifest m{source_w, source_h, tile_size, pad, {}};
  int id = 0;
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) m.tiles.push_back({id++, r, c, c * tile_size, r * tile_size});
  }
  return m;
}

void TileManifest::validate() const {
  if (tile_size < 1 || source_w < 1 || source_h < 1) throw FormatError("manifest: non-positive dimensions");
  if (tiles.size() != static_cast<std::size_t>(rows()) * cols()) {
    throw FormatError("manifest: expected " + std::to_string(rows() * cols()) + " tiles, found " +
                      std::to_string(tiles.size()));
  }
  std::set<int> ids;
  std::set<std::pair<int, int>> cells;
  for (const auto& e : tiles) {
    if (!ids.insert(e.id).second) throw FormatError("manifest: duplicate tile id " + std::to_string(e.id));
    if (e.row < 0 || e.row >= rows() || e.col < 0 || e.col >= cols()) {
      throw FormatError("manifest: tile " + std::to_string(e.id) + " outside the grid");
    }
    if (e.x0 != e.col * tile_size || e.y0 != e.row * tile_size) {
      throw FormatError("manifest: tile " + std::to_string(e.id) + " origin does not match its grid cell");
    }
    if (!cells.insert({e.row, e.col}).second) {
      throw FormatError("manifest: grid cell of tile " + std::to_string(e.id) + " appears twice");
    }
  }
}

std::string manifest_to_json(const TileManifest& m) {
  nlohmann::json j;
  j["source_w"] = m.source_w;
  j["source_h"] = m.source_h;
  j["tile_size"] = m.tile_size;
  j["pad"] = to_string(m.pad);
  j["tiles"] = nlohmann::json::array();
  for (const auto& e : m.tiles) {
    j["tiles"].push_back({{"id", e.id}, {"row", e.row}, {"col", e.col}, {"x0", e.x0}, {"y0", e.y0}});
  }
  return j.dump(2);
}

TileManifest manifest_from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    TileManifest m;
    m.source_w = j.at("source_w").get<int>();
    m.source_h = j.at("source_h").get<int>();
    m.tile_size = j.at("tile_size").get<int>();
    m.pad = pad_policy_from_string(j.at("pad").get<std::string>());
    for (const auto& t : j.at("tiles")) {
      m.tiles.push_back({t.at("id").get<int>(), t.at("row").get<int>(), t.at("col").get<int>(), t.at("x0").get<int>(),
                         t.at("y0").get<int>()});
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

std::string tile_file_name(const std::string& stem, int row, int col) {
  return stem + "_r" + std::to_string(row) + "_c" + std::to_string(col) + ".png";
}

}  // namespace xmt
