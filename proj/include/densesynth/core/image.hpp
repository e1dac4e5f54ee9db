#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <png.h>

#include "densesynth/core/error.hpp"

namespace densesynth {

/// Single-channel intensity grid, row-major, values normalized to [0, 1].
/// `bit_depth` is the depth declared by the source and used on export.
struct Image {
  int height = 0;
  int width = 0;
  int bit_depth = 16;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, float fill = 0.0f)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {
    if (h < 0 || w < 0) throw InvalidInput("image dimensions must be non-negative");
  }

  [[nodiscard]] bool empty() const noexcept { return pixels.empty(); }
  [[nodiscard]] std::size_t size() const noexcept { return pixels.size(); }

  float& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  [[nodiscard]] float at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }

  [[nodiscard]] float max_value() const {
    return pixels.empty() ? 0.0f : *std::max_element(pixels.begin(), pixels.end());
  }

  bool operator==(const Image&) const = default;
};

/// Snap every pixel to the 16-bit grid so in-memory values equal what a
/// PNG round trip produces.
inline void quantize16(Image& image) {
  for (float& v : image.pixels) {
    v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 65535.0f)) / 65535.0f;
  }
}

inline Image flip_horizontal(const Image& image) {
  Image out = image;
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) out.at(r, c) = image.at(r, image.width - 1 - c);
  }
  return out;
}

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Separable triangle-filter resampling along one axis. Support widens with the
// downscale factor so shrinking averages instead of aliasing.
inline std::vector<float> resample_axis(std::span<const float> in, int lines, int in_len,
                                        int out_len, bool along_rows) {
  std::vector<float> out(static_cast<std::size_t>(lines) * out_len, 0.0f);
  const double ratio = static_cast<double>(in_len) / out_len;
  const double support = std::max(1.0, ratio);
  for (int o = 0; o < out_len; ++o) {
    const double center = (o + 0.5) * ratio;
    const int lo = std::max(0, static_cast<int>(std::floor(center - support)));
    const int hi = std::min(in_len - 1, static_cast<int>(std::ceil(center + support)));
    std::vector<double> weights;
    double total = 0.0;
    for (int i = lo; i <= hi; ++i) {
      const double w = std::max(0.0, 1.0 - std::abs((i + 0.5 - center) / support));
      weights.push_back(w);
      total += w;
    }
    for (int line = 0; line < lines; ++line) {
      double acc = 0.0;
      for (int i = lo; i <= hi; ++i) {
        const std::size_t idx = along_rows ? static_cast<std::size_t>(i) * lines + line
                                           : static_cast<std::size_t>(line) * in_len + i;
        acc += weights[i - lo] * in[idx];
      }
      const std::size_t dst = along_rows ? static_cast<std::size_t>(o) * lines + line
                                         : static_cast<std::size_t>(line) * out_len + o;
      out[dst] = static_cast<float>(acc / total);
    }
  }
  return out;
}

}  // namespace detail

/// Resample to exactly `out_h` x `out_w`.
inline Image resample(const Image& image, int out_h, int out_w) {
  if (image.empty()) throw InvalidInput("cannot resample an empty image");
  if (out_h <= 0 || out_w <= 0) throw InvalidInput("resample target must be positive");
  if (out_h == image.height && out_w == image.width) return image;
  // Horizontal pass: height lines of width samples.
  auto horiz = detail::resample_axis(image.pixels, image.height, image.width, out_w, false);
  // Vertical pass over a row-major (height x out_w) buffer.
  auto vert = detail::resample_axis(horiz, out_w, image.height, out_h, true);
  Image out;
  out.height = out_h;
  out.width = out_w;
  out.bit_depth = image.bit_depth;
  out.pixels = std::move(vert);
  return out;
}

/// Downsize so height <= max_height, preserving aspect. Smaller images pass through.
inline Image downsize_to_height(const Image& image, int max_height) {
  if (image.height <= max_height) return image;
  const double scale = static_cast<double>(max_height) / image.height;
  const int w = std::max(1, static_cast<int>(std::lround(image.width * scale)));
  return resample(image, max_height, w);
}

inline void write_png(const Image& image, const std::filesystem::path& path, int bit_depth = 16) {
  if (image.empty()) throw InvalidInput("cannot write an empty image: " + path.string());
  if (bit_depth != 8 && bit_depth != 16) throw InvalidInput("PNG bit depth must be 8 or 16");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  detail::FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error("cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng initialization failed");
  }
  const int stride = image.width * (bit_depth / 8);
  std::vector<unsigned char> row(static_cast<std::size_t>(stride));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed writing PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width, image.height, bit_depth, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const double full = bit_depth == 16 ? 65535.0 : 255.0;
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      const auto v = static_cast<unsigned>(
          std::lround(std::clamp(static_cast<double>(image.at(r, c)), 0.0, 1.0) * full));
      if (bit_depth == 16) {
        row[2 * c] = static_cast<unsigned char>(v >> 8);  // PNG is big-endian
        row[2 * c + 1] = static_cast<unsigned char>(v & 0xFF);
      } else {
        row[c] = static_cast<unsigned char>(v);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Reads 8- or 16-bit grayscale PNG (colour inputs are converted to gray).
inline Image read_png(const std::filesystem::path& path) {
  detail::FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error("cannot open image: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("libpng initialization failed");
  }
  Image image;
  std::vector<unsigned char> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("failed reading PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.width = static_cast<int>(png_get_image_width(png, info));
  image.bit_depth = png_get_bit_depth(png, info) == 16 ? 16 : 8;
  image.pixels.resize(static_cast<std::size_t>(image.height) * image.width);
  row.resize(png_get_rowbytes(png, info));
  const double full = image.bit_depth == 16 ? 65535.0 : 255.0;
  for (int r = 0; r < image.height; ++r) {
    png_read_row(png, row.data(), nullptr);
    for (int c = 0; c < image.width; ++c) {
      const unsigned v =
          image.bit_depth == 16 ? (static_cast<unsigned>(row[2 * c]) << 8) | row[2 * c + 1] : row[c];
      image.at(r, c) = static_cast<float>(v / full);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

}  // namespace densesynth
