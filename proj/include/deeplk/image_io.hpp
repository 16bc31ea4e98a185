#pragma once

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "deeplk/core.hpp"
#include "deeplk/image.hpp"

namespace deeplk {

namespace detail {

inline int pnm_next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok.empty() ? EOF : 0;
}

inline Image load_pnm(std::istream& in, const std::string& path) {
  std::string magic, tok;
  if (pnm_next_token(in, magic) == EOF || (magic != "P5" && magic != "P6"))
    throw DataError("not a binary PNM file: " + path);
  const int channels = magic == "P5" ? 1 : 3;
  int dims[3];
  for (int& d : dims) {
    if (pnm_next_token(in, tok) == EOF)
      throw DataError("truncated PNM header: " + path);
    d = std::stoi(tok);
  }
  const int width = dims[0], height = dims[1], maxval = dims[2];
  if (maxval <= 0 || maxval > 255)
    throw DataError("unsupported PNM maxval (expected <= 255): " + path);
  std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height * channels);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw DataError("truncated PNM pixel data: " + path);
  Image img(height, width, channels);
  const double scale = 1.0 / maxval;
  for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] * scale;
  return img;
}

struct PngReadGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngReadGuard() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWriteGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngWriteGuard() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

inline Image load_png(const std::string& path) {
  PngReadGuard g;
  g.fp = std::fopen(path.c_str(), "rb");
  if (!g.fp) throw DataError("cannot open image file: " + path);
  g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  g.info = g.png ? png_create_info_struct(g.png) : nullptr;
  if (!g.png || !g.info) throw DataError("libpng initialization failed: " + path);
  if (setjmp(png_jmpbuf(g.png))) throw DataError("corrupt PNG file: " + path);
  png_init_io(g.png, g.fp);
  png_read_info(g.png, g.info);

  // Normalize everything to 8-bit gray or RGB, alpha stripped.
  png_set_strip_16(g.png);
  png_set_strip_alpha(g.png);
  png_set_packing(g.png);
  const int color = png_get_color_type(g.png, g.info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(g.png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(g.png, g.info) < 8)
    png_set_expand_gray_1_2_4_to_8(g.png);
  png_read_update_info(g.png, g.info);

  const int width = static_cast<int>(png_get_image_width(g.png, g.info));
  const int height = static_cast<int>(png_get_image_height(g.png, g.info));
  const int channels = static_cast<int>(png_get_channels(g.png, g.info));
  if (channels != 1 && channels != 3)
    throw DataError("unsupported PNG channel count: " + path);

  std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height * channels);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y)
    rows[y] = raw.data() + static_cast<std::size_t>(y) * width * channels;
  png_read_image(g.png, rows.data());
  png_read_end(g.png, nullptr);

  Image img(height, width, channels);
  for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0;
  return img;
}

inline void save_png(const std::string& path, const Image& img) {
  PngWriteGuard g;
  g.fp = std::fopen(path.c_str(), "wb");
  if (!g.fp) throw DataError("cannot write image file: " + path);
  g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  g.info = g.png ? png_create_info_struct(g.png) : nullptr;
  if (!g.png || !g.info) throw DataError("libpng initialization failed: " + path);
  if (setjmp(png_jmpbuf(g.png))) throw DataError("PNG write failed: " + path);
  png_init_io(g.png, g.fp);
  const int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(g.png, g.info, img.cols, img.rows, 8, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(g.png, g.info);
  std::vector<unsigned char> row(static_cast<std::size_t>(img.cols) * img.channels);
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x)
      for (int c = 0; c < img.channels; ++c)
        row[static_cast<std::size_t>(x) * img.channels + c] = static_cast<unsigned char>(
            std::lround(clamp01(img.at(y, x, c)) * 255.0));
    png_write_row(g.png, row.data());
  }
  png_write_end(g.png, nullptr);
}

inline void save_pnm(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw DataError("PNM supports 1 or 3 channels: " + path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image file: " + path);
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.cols << " " << img.rows << "\n255\n";
  std::vector<unsigned char> raw(img.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<unsigned char>(std::lround(clamp01(img.data[i]) * 255.0));
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError("short write: " + path);
}

}  // namespace detail

/// Loads an 8-bit grayscale or RGB image (PNG or binary PNM), scaled to
/// [0, 1] as value / 255.
inline Image load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image file: " + path);
  unsigned char sig[8] = {0};
  in.read(reinterpret_cast<char*>(sig), 8);
  in.seekg(0);
  if (in.gcount() >= 2 && sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6'))
    return detail::load_pnm(in, path);
  if (in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0) {
    in.close();
    return detail::load_png(path);
  }
  throw DataError("unrecognized image format (PNG or binary PNM expected): " + path);
}

/// Writes an image as 8-bit PNG (.png) or binary PNM (.pgm/.ppm/.pnm),
/// chosen by extension.
inline void save_image(const std::string& path, const Image& img) {
  const auto dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "png")
    detail::save_png(path, img);
  else if (ext == "pgm" || ext == "ppm" || ext == "pnm")
    detail::save_pnm(path, img);
  else
    throw DataError("unsupported image extension: " + path);
}

}  // namespace deeplk
