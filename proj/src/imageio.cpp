/*
 * Copyright 2026 The tgvdeconv Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "tgvdeconv/imageio.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cerrno>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <vector>

#include "tgvdeconv/error.hpp"

namespace tgvd {

namespace {

constexpr char kF64Magic[8] = {'T', 'G', 'V', 'D', 'F', '6', '4', '\0'};

std::string extension(const std::string& path) {
  const auto dot = path.rfind('.');
  if (dot == std::string::npos) return {};
  std::string e = path.substr(dot + 1);
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path + "': " + std::strerror(errno));
  return f;
}

template <class T>
void put_le(std::ostream& os, T v) {
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  os.write(reinterpret_cast<const char*>(bits.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& is, const std::string& path) {
  std::array<unsigned char, sizeof(T)> bits;
  if (!is.read(reinterpret_cast<char*>(bits.data()), sizeof(T))) {
    throw IoError("'" + path + "' is truncated");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  return std::bit_cast<T>(bits);
}

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

unsigned char quantize8(double v) noexcept {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return 255;
  return static_cast<unsigned char>(std::lround(v * 255.0));
}

Image read_png(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("'" + path + "' is not a PNG file");
  }
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err,
                                           png_error_fn, png_warning_fn);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buf;
  int h = 0, w = 0, channels = 0, depth = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("cannot decode '" + path + "': " + err);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  h = static_cast<int>(png_get_image_height(png, info));
  w = static_cast<int>(png_get_image_width(png, info));
  channels = png_get_channels(png, info);
  depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buf.resize(rowbytes * h);
  rows.resize(h);
  for (int x = 0; x < h; ++x) rows[x] = buf.data() + x * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(h, w);
  const double maxv = depth == 16 ? 65535.0 : 255.0;
  for (int x = 0; x < h; ++x) {
    const unsigned char* r = rows[x];
    for (int y = 0; y < w; ++y) {
      double c[3] = {0, 0, 0};
      for (int ch = 0; ch < std::min(channels, 3); ++ch) {
        const std::size_t idx = static_cast<std::size_t>(y) * channels + ch;
        c[ch] = depth == 16 ? (r[2 * idx] | (r[2 * idx + 1] << 8)) : r[idx];
      }
      const double v = channels >= 3 ? 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2] : c[0];
      img(x, y) = v / maxv;
    }
  }
  return img;
}

void write_png(const std::string& path, const Image& img) {
  if (img.empty()) throw InvalidArgument("cannot write an empty image");
  FilePtr f = open_file(path, "wb");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err,
                                            png_error_fn, png_warning_fn);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  std::vector<unsigned char> buf(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) buf[i] = quantize8(img[i]);
  std::vector<png_bytep> rows(img.height());
  for (int x = 0; x < img.height(); ++x) rows[x] = buf.data() + static_cast<std::size_t>(x) * img.width();
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("cannot encode '" + path + "': " + err);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(c);
    }
    if (t.empty()) throw IoError("'" + path + "' has a truncated PGM header");
    return t;
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P2") throw IoError("'" + path + "' is not a PGM file");
  int w = 0, h = 0, maxv = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxv = std::stoi(token());
  } catch (const std::logic_error&) {
    throw IoError("'" + path + "' has a malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxv <= 0 || maxv > 65535) {
    throw IoError("'" + path + "' has invalid PGM dimensions");
  }
  Image img(h, w);
  if (magic == "P5") {
    const int bytes = maxv > 255 ? 2 : 1;
    std::vector<unsigned char> buf(img.size() * bytes);
    if (!in.read(reinterpret_cast<char*>(buf.data()), buf.size())) {
      throw IoError("'" + path + "' is truncated");
    }
    for (std::size_t i = 0; i < img.size(); ++i) {
      const int v = bytes == 2 ? (buf[2 * i] << 8) | buf[2 * i + 1] : buf[i];
      img[i] = v / static_cast<double>(maxv);
    }
  } else {
    for (std::size_t i = 0; i < img.size(); ++i) {
      int v;
      if (!(in >> v)) throw IoError("'" + path + "' is truncated");
      img[i] = v / static_cast<double>(maxv);
    }
  }
  return img;
}

void write_pgm(const std::string& path, const Image& img) {
  if (img.empty()) throw InvalidArgument("cannot write an empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  for (std::size_t i = 0; i < img.size(); ++i) out.put(static_cast<char>(quantize8(img[i])));
  if (!out) throw IoError("write to '" + path + "' failed");
}

Image read_f64(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kF64Magic, 8) != 0) {
    throw IoError("'" + path + "' is not an f64 image");
  }
  const auto h = get_le<std::uint32_t>(in, path);
  const auto w = get_le<std::uint32_t>(in, path);
  const auto c = get_le<std::uint32_t>(in, path);
  if (h == 0 || w == 0 || h > 65536 || w > 65536) throw IoError("'" + path + "' has invalid dimensions");
  if (c != 1) throw IoError("'" + path + "' has " + std::to_string(c) + " channels; expected 1");
  std::vector<double> v(static_cast<std::size_t>(h) * w);
  for (double& d : v) d = get_le<double>(in, path);
  return Image(static_cast<int>(h), static_cast<int>(w), std::move(v));
}

void write_f64(const std::string& path, const Image& img) {
  if (img.empty()) throw InvalidArgument("cannot write an empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(kF64Magic, 8);
  put_le<std::uint32_t>(out, img.height());
  put_le<std::uint32_t>(out, img.width());
  put_le<std::uint32_t>(out, 1);
  for (double d : img.data()) put_le<double>(out, d);
  if (!out) throw IoError("write to '" + path + "' failed");
}

Image read_image(const std::string& path) {
  const std::string e = extension(path);
  if (e == "png") return read_png(path);
  if (e == "pgm" || e == "pnm") return read_pgm(path);
  if (e == "f64") return read_f64(path);
  throw IoError("unsupported image format '" + path + "' (expected .png, .pgm or .f64)");
}

void write_image(const std::string& path, const Image& img) {
  const std::string e = extension(path);
  if (e == "png") return write_png(path, img);
  if (e == "pgm") return write_pgm(path, img);
  if (e == "f64") return write_f64(path, img);
  throw IoError("unsupported image format '" + path + "' (expected .png, .pgm or .f64)");
}

Kernel read_kernel_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<double> v;
  std::string line;
  int rows = 0;
  std::size_t cols = 0;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::size_t n = 0;
    std::string tok;
    while (ls >> tok) {
      try {
        v.push_back(std::stod(tok));
      } catch (const std::logic_error&) {
        throw IoError("'" + path + "': bad kernel entry '" + tok + "'");
      }
      ++n;
    }
    if (n == 0) continue;
    if (cols == 0) cols = n;
    if (n != cols) throw IoError("'" + path + "': ragged kernel rows");
    ++rows;
  }
  if (rows == 0 || static_cast<std::size_t>(rows) != cols) {
    throw IoError("'" + path + "': kernel must be a square matrix");
  }
  try {
    return Kernel(rows, std::move(v));
  } catch (const InvalidArgument& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

void write_kernel_text(const std::string& path, const Kernel& k) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << std::setprecision(17);
  for (int i = 0; i < k.size(); ++i) {
    for (int j = 0; j < k.size(); ++j) out << (j ? " " : "") << k(i, j);
    out << '\n';
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

void write_kernel_png(const std::string& path, const Kernel& k) {
  Image img = k.as_image();
  const double mx = *std::max_element(k.data().begin(), k.data().end());
  if (mx > 0.0) img *= 1.0 / mx;
  write_png(path, img);
}

Kernel read_kernel(const std::string& path) {
  const std::string e = extension(path);
  if (e == "png" || e == "pgm" || e == "f64") {
    const Image img = read_image(path);
    if (img.height() != img.width() || img.height() % 2 == 0) {
      throw IoError("'" + path + "': kernel image must be square with odd size");
    }
    double sum = 0.0;
    for (double v : img.data()) sum += v;
    if (!(sum > 0.0)) throw IoError("'" + path + "': kernel image is all zero");
    return Kernel::normalized(img.height(), img.values());
  }
  return read_kernel_text(path);
}

}  // namespace tgvd
