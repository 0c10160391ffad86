#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "dwa/tensor.hpp"

namespace dwa {

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct PngMemoryReader {
  const unsigned char* data;
  std::size_t size;
  std::size_t pos;
};

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t length) {
  auto* r = static_cast<PngMemoryReader*>(png_get_io_ptr(png));
  if (r->pos + length > r->size) png_error(png, "unexpected end of data");
  std::memcpy(out, r->data + r->pos, length);
  r->pos += length;
}

inline void png_silent_warning(png_structp, png_const_charp) {}

struct DecodedPng {
  std::vector<unsigned char> pixels;
  std::size_t stride = 0;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int channels = 0;
  int depth = 0;
};

// Returns false on a libpng error. Kept free of C++ locals that need
// destruction so the longjmp path is well defined.
inline bool decode_png(const std::vector<unsigned char>& bytes, DecodedPng* out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_silent_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  PngMemoryReader reader{bytes.data(), bytes.size(), 0};
  png_bytep* volatile rows = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    std::free(rows);
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &reader, png_read_from_memory);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  out->width = png_get_image_width(png, info);
  out->height = png_get_image_height(png, info);
  out->channels = png_get_channels(png, info);
  out->depth = png_get_bit_depth(png, info);
  out->stride = png_get_rowbytes(png, info);
  out->pixels.resize(out->stride * out->height);
  rows = static_cast<png_bytep*>(std::malloc(sizeof(png_bytep) * (out->height + 1)));
  for (png_uint_32 i = 0; i < out->height; ++i) rows[i] = out->pixels.data() + i * out->stride;
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  std::free(rows);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

}  // namespace detail

// Decodes 8- or 16-bit gray/RGB (alpha dropped, palette expanded) into a
// (1, 3, h, w) tensor scaled to [0, 1]. Gray is replicated to three channels.
template <typename T>
Tensor<T> load_png(const std::string& path) {
  const std::vector<unsigned char> bytes = detail::read_file(path);
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) fail(ErrorCode::DecodeError, path + ": not a PNG file");
  detail::DecodedPng decoded;
  if (!detail::decode_png(bytes, &decoded)) fail(ErrorCode::DecodeError, path + ": corrupt or truncated PNG");
  const auto& pixels = decoded.pixels;
  const std::size_t stride = decoded.stride;
  const int channels = decoded.channels;
  const int depth = decoded.depth;
  const std::size_t height = decoded.height;
  const std::size_t width = decoded.width;

  if ((channels != 1 && channels != 3) || (depth != 8 && depth != 16)) {
    fail(ErrorCode::DecodeError, path + ": unsupported PNG layout");
  }
  const std::size_t h = height, w = width;
  const double max_value = depth == 16 ? 65535.0 : 255.0;
  std::vector<T> out(3 * h * w);
  for (std::size_t i = 0; i < h; ++i) {
    const unsigned char* row = pixels.data() + i * stride;
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t src_c = channels == 1 ? 0 : c;
        const std::size_t sample = j * static_cast<std::size_t>(channels) + src_c;
        const unsigned v = depth == 16 ? (static_cast<unsigned>(row[2 * sample]) << 8) | row[2 * sample + 1]
                                       : row[sample];
        out[(c * h + i) * w + j] = static_cast<T>(static_cast<double>(v) / max_value);
      }
    }
  }
  return Tensor<T>::create(Shape{1, 3, h, w}, std::move(out));
}

inline std::uint8_t quantize8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Writes batch element 0 as 8-bit RGB (or gray for one channel) after clamping to [0, 1].
template <typename T>
void save_png(const Tensor<T>& img, const std::string& path) {
  const Shape s = img.shape();
  if (s.c != 3 && s.c != 1) fail(ErrorCode::ChannelMismatch, "save_png needs 1 or 3 channels, got " + to_string(s));
  const std::size_t channels = s.c;
  std::vector<unsigned char> pixels(s.h * s.w * channels);
  for (std::size_t i = 0; i < s.h; ++i)
    for (std::size_t j = 0; j < s.w; ++j)
      for (std::size_t c = 0; c < channels; ++c)
        pixels[(i * s.w + j) * channels + c] = quantize8(static_cast<double>(img(0, c, i, j)));

  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) fail(ErrorCode::IoError, "cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, detail::png_silent_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    std::fclose(fp);
    fail(ErrorCode::IoError, "libpng init failed");
  }
  std::vector<png_bytep> rows(s.h);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(ErrorCode::IoError, "failed encoding " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(s.w), static_cast<png_uint_32>(s.h), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  for (std::size_t i = 0; i < s.h; ++i) rows[i] = pixels.data() + i * s.w * channels;
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) fail(ErrorCode::IoError, "failed closing " + path);
}

// 16-bit RGB writer, used to build test fixtures at full precision.
inline void save_png16(const std::vector<std::uint16_t>& rgb, std::size_t h, std::size_t w, const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) fail(ErrorCode::IoError, "cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, detail::png_silent_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    std::fclose(fp);
    fail(ErrorCode::IoError, "libpng init failed");
  }
  std::vector<unsigned char> bytes(rgb.size() * 2);
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    bytes[2 * i] = static_cast<unsigned char>(rgb[i] >> 8);
    bytes[2 * i + 1] = static_cast<unsigned char>(rgb[i] & 0xFF);
  }
  std::vector<png_bytep> rows(h);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(ErrorCode::IoError, "failed encoding " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 16, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  for (std::size_t i = 0; i < h; ++i) rows[i] = bytes.data() + i * w * 6;
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace dwa
