#pragma once

#include <filesystem>
#include <string>

#include "xmt/image.hpp"

namespace xmt {

inline constexpr int kFigureGutter = 4;
inline constexpr int kFigureLabelBand = 12;

/// Input | generated | ground truth side by side on white, each column
/// labelled above. Width 3w + 2 gutters, height h + label band; RGB.
Raster comparison_figure(const Raster& input, const Raster& generated, const Raster& truth);
void emit_comparison_figure(const Raster& input, const Raster& generated, const Raster& truth,
                            const std::filesystem::path& path);

/// Draws upper-case text with a 5x7 bitmap font, clipped to the image.
void draw_text(Raster& img, int x, int y, const std::string& text, std::uint8_t value = 0);

}  // namespace xmt
