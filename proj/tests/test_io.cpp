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

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "oracles.hpp"
#include "tgvdeconv/error.hpp"
#include "tgvdeconv/imageio.hpp"
#include "tgvdeconv/synth.hpp"

using namespace tgvd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("tgvd_io_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const char* name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("f64 images round-trip losslessly") {
  TempDir dir;
  oracle::Rng rng(1);
  const Image a = oracle::random_image(7, 5, rng);
  write_f64(dir / "a.f64", a);
  CHECK(read_f64(dir / "a.f64") == a);
  CHECK(read_image(dir / "a.f64") == a);
  CHECK(fs::file_size(dir / "a.f64") == 8 + 12 + 35 * 8);
}

TEST_CASE("8-bit images round-trip within half a quantisation step") {
  TempDir dir;
  const Image a = make_pattern(20, 17, 2);
  for (const char* name : {"a.png", "a.pgm"}) {
    write_image(dir / name, a);
    const Image b = read_image(dir / name);
    REQUIRE(b.same_shape(a));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1.0 / 510.0 + 1e-12);
  }
  CHECK(quantize8(-0.2) == 0);
  CHECK(quantize8(1.7) == 255);
  CHECK(quantize8(0.5) == 128);
}

TEST_CASE("quantised images are fixed points of a second round trip") {
  TempDir dir;
  write_png(dir / "a.png", make_pattern(16, 16, 3));
  const Image once = read_png(dir / "a.png");
  write_png(dir / "b.png", once);
  CHECK(read_png(dir / "b.png") == once);
}

TEST_CASE("ASCII PGM files are accepted") {
  TempDir dir;
  {
    std::ofstream out(dir / "a.pgm");
    out << "P2\n# comment\n3 2\n255\n0 128 255\n255 0 51\n";
  }
  const Image a = read_pgm(dir / "a.pgm");
  CHECK(a.height() == 2);
  CHECK(a.width() == 3);
  CHECK(a(0, 2) == 1.0);
  CHECK(a(1, 2) == doctest::Approx(0.2));
}

TEST_CASE("image readers report unreadable and malformed files as I/O errors") {
  TempDir dir;
  CHECK_THROWS_AS(read_image(dir / "missing.png"), IoError);
  CHECK_THROWS_AS(read_image(dir / "image.bmp"), IoError);
  {
    std::ofstream out(dir / "junk.png");
    out << "definitely not a png";
  }
  CHECK_THROWS_AS(read_png(dir / "junk.png"), IoError);
  {
    std::ofstream out(dir / "short.f64", std::ios::binary);
    out << "TGVDF64";
  }
  CHECK_THROWS_AS(read_f64(dir / "short.f64"), IoError);
  CHECK_THROWS_AS(write_png(dir / "e.png", Image()), InvalidArgument);
}

TEST_CASE("kernel text files round-trip exactly") {
  TempDir dir;
  const Kernel k = gaussian_kernel(5, 1.3);
  write_kernel_text(dir / "k.txt", k);
  const Kernel back = read_kernel_text(dir / "k.txt");
  CHECK(back == k);
  CHECK(read_kernel(dir / "k.txt") == k);
}

TEST_CASE("kernel images are renormalised on read") {
  TempDir dir;
  const Kernel k = gaussian_kernel(5, 1.0);
  write_kernel_png(dir / "k.png", k);
  const Kernel back = read_kernel(dir / "k.png");
  double sum = 0.0;
  for (double v : back.data()) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 0; i < 25; ++i) CHECK(std::abs(back.data()[i] - k.data()[i]) < 5e-3);
}

TEST_CASE("malformed kernel text is rejected") {
  TempDir dir;
  {
    std::ofstream out(dir / "ragged.txt");
    out << "0.5 0.5\n1\n";
  }
  CHECK_THROWS_AS(read_kernel_text(dir / "ragged.txt"), IoError);
  {
    std::ofstream out(dir / "even.txt");
    out << "0.25 0.25\n0.25 0.25\n";
  }
  CHECK_THROWS_AS(read_kernel_text(dir / "even.txt"), IoError);
  {
    std::ofstream out(dir / "word.txt");
    out << "a\n";
  }
  CHECK_THROWS_AS(read_kernel_text(dir / "word.txt"), IoError);
}
