#include "xmt/figure.hpp"

#include <array>
#include <map>

#include "xmt/png_io.hpp"

namespace xmt {

namespace {

using Glyph = std::array<std::uint8_t, 7>;

const std::map<char, Glyph>& font() {
  static const std::map<char, Glyph> glyphs = {
      {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
      {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
      {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
      {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
  };
  return glyphs;
}

void blit(Raster& dst, const Raster& src, int x0, int y0) {
  const Raster rgb = to_rgb(src);
  for (int y = 0; y < rgb.height; ++y) {
    for (int x = 0; x < rgb.width; ++x) {
      for (int c = 0; c < 3; ++c) dst.at(x0 + x, y0 + y, c) = rgb.at(x, y, c);
    }
  }
}

}  // namespace

void draw_text(Raster& img, int x, int y, const std::string& text, std::uint8_t value) {
  const auto& glyphs = font();
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto it = glyphs.find(text[i]);
    if (it == glyphs.end()) continue;
    const int gx = x + static_cast<int>(i) * 6;
    for (int r = 0; r < 7; ++r) {
      for (int col = 0; col < 5; ++col) {
        if (((it->second[r] >> (4 - col)) & 1) == 0) continue;
        const int px = gx + col, py = y + r;
        if (px < 0 || py < 0 || px >= img.width || py >= img.height) continue;
        for (int c = 0; c < img.channels; ++c) img.at(px, py, c) = value;
      }
    }
  }
}

Raster comparison_figure(const Raster& input, const Raster& generated, const Raster& truth) {
  const int w = input.width, h = input.height;
  if (generated.width != w || generated.height != h || truth.width != w || truth.height != h) {
    throw ShapeError("figure: input, generated and ground truth must share dimensions");
  }
  Raster fig(3 * w + 2 * kFigureGutter, h + kFigureLabelBand, 3, 255);
  const char* labels[] = {"INPUT MRI", "GENERATED", "GROUND TRUTH"};
  const Raster* panels[] = {&input, &generated, &truth};
  for (int k = 0; k < 3; ++k) {
    const int x0 = k * (w + kFigureGutter);
    blit(fig, *panels[k], x0, kFigureLabelBand);
    Raster band(w, kFigureLabelBand, 3, 255);
    draw_text(band, 1, 2, labels[k]);
    for (int y = 0; y < kFigureLabelBand; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) fig.at(x0 + x, y, c) = band.at(x, y, c);
      }
    }
  }
  return fig;
}

void emit_comparison_figure(const Raster& input, const Raster& generated, const Raster& truth,
                            const std::filesystem::path& path) {
  write_png(comparison_figure(input, generated, truth), path);
}

}  // namespace xmt
