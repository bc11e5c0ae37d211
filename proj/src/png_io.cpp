#include "xmt/png_io.hpp"

#include <png.h>

#include <fstream>
#include <sstream>

namespace xmt {

namespace {

Raster finish_read(png_image& image, const std::string& what) {
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (image.width < 1 || image.height < 1 || image.width > (1u << 16) || image.height > (1u << 16)) {
    png_image_free(&image);
    throw FormatError(what + ": unsupported PNG dimensions");
  }
  Raster out(static_cast<int>(image.width), static_cast<int>(image.height), color ? 3 : 1);
  if (png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr) == 0) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError(what + ": " + msg);
  }
  return out;
}

}  // namespace

Raster read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_png(ss.str());
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "' is not a readable PNG (" + e.what() + ")");
  }
}

Raster decode_png(const std::string& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()) == 0) {
    throw FormatError(image.message);
  }
  return finish_read(image, "png decode");
}

std::string encode_png(const Raster& img) {
  if (img.empty() || (img.channels != 1 && img.channels != 3)) {
    throw ShapeError("png encode: expected a non-empty 1 or 3 channel raster");
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr) == 0) {
    throw FormatError(std::string("png encode: ") + image.message);
  }
  std::string out(size, '\0');
  if (png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr) == 0) {
    throw FormatError(std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

void write_png(const Raster& img, const std::filesystem::path& path) {
  const std::string bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace xmt
