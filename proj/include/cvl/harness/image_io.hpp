#pragma once

// Grayscale/RGB PNG load and 16-bit grayscale PNG save through libpng.

#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "cvl/errors.hpp"
#include "cvl/grid.hpp"

namespace cvl {

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace detail

/// Writes channel 0 of `image` (values in [0,1], clamped) as 16-bit gray.
inline void write_png16(const Grid& image, const std::filesystem::path& path) {
  detail::FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng: out of memory");
  }
  std::vector<png_byte> row(static_cast<std::size_t>(image.width()) * 2);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng: failed writing " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, image.width(), image.height(), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      const double v = std::clamp(static_cast<double>(image.at(r, c, 0)), 0.0, 1.0);
      const auto q = static_cast<unsigned>(std::lround(v * 65535.0));
      row[2 * c] = static_cast<png_byte>(q >> 8);  // PNG samples are big-endian
      row[2 * c + 1] = static_cast<png_byte>(q & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Reads a PNG into a grid with values in [0,1]; gray stays 1 channel,
/// color becomes 3 channels, alpha is discarded.
inline Grid read_png(const std::filesystem::path& path) {
  detail::FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw Error("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("libpng: out of memory");
  }
  Grid out;
  std::vector<png_byte> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("libpng: failed reading " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // to host little-endian
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (int r = 0; r < height; ++r) rows[r] = buffer.data() + rowbytes * r;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  out = Grid(height, width, channels);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      for (int k = 0; k < channels; ++k) {
        const std::size_t i = static_cast<std::size_t>(c) * channels + k;
        double v;
        if (out_depth == 16) {
          const png_byte* p = rows[r] + 2 * i;
          v = (p[0] | (p[1] << 8)) / 65535.0;
        } else {
          v = rows[r][i] / 255.0;
        }
        out.at(r, c, k) = static_cast<float>(v);
      }
  return out;
}

}  // namespace cvl
