#pragma once

#include <filesystem>
#include <string>

#include "xmt/image.hpp"

namespace xmt {

/// Decodes to 8-bit gray (1 channel) or RGB (3 channels); alpha is composited
/// away and 16-bit samples are reduced.
Raster read_png(const std::filesystem::path& path);
Raster decode_png(const std::string& bytes);

void write_png(const Raster& img, const std::filesystem::path& path);
std::string encode_png(const Raster& img);

}  // namespace xmt
