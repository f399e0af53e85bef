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

#include "tgvdeconv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "tgvdeconv/error.hpp"
#include "tgvdeconv/imageio.hpp"

namespace tgvd {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

double parse_number(const std::string& tok, const std::string& spec) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::logic_error&) {
    pos = 0;
  }
  if (pos == 0 || pos != tok.size() || !std::isfinite(v)) {
    throw InvalidArgument("kernel spec '" + spec + "': '" + tok + "' is not a number");
  }
  return v;
}

int parse_size(const std::string& tok, const std::string& spec) {
  const double v = parse_number(tok, spec);
  if (v != std::floor(v) || v < 1 || v > 255 || static_cast<int>(v) % 2 == 0) {
    throw InvalidArgument("kernel spec '" + spec + "': size must be an odd integer in [1, 255]");
  }
  return static_cast<int>(v);
}

}  // namespace

Kernel gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0) throw InvalidArgument("gaussian kernel size must be odd");
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian sigma must be positive");
  const int r = size / 2;
  std::vector<double> w(static_cast<std::size_t>(size) * size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double d2 = (i - r) * (i - r) + (j - r) * (j - r);
      w[i * size + j] = std::exp(-d2 / (2.0 * sigma * sigma));
    }
  return Kernel::normalized(size, std::move(w));
}

Kernel motion_kernel(int size, double length, double angle_deg) {
  if (size < 1 || size % 2 == 0) throw InvalidArgument("motion kernel size must be odd");
  if (!(length > 0.0) || length > size) {
    throw InvalidArgument("motion length must lie in (0, size]");
  }
  const double r = size / 2;
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double dx = std::sin(a), dy = std::cos(a);
  std::vector<double> w(static_cast<std::size_t>(size) * size, 0.0);
  // Bilinear splats of dense samples along the segment.
  const int samples = std::max(16, static_cast<int>(std::ceil(length * 16)));
  for (int s = 0; s < samples; ++s) {
    const double t = (samples == 1) ? 0.0 : (s / (samples - 1.0) - 0.5) * (length - 1.0);
    const double px = r + t * dx, py = r + t * dy;
    const int x0 = static_cast<int>(std::floor(px)), y0 = static_cast<int>(std::floor(py));
    const double fx = px - x0, fy = py - y0;
    for (int ox = 0; ox <= 1; ++ox)
      for (int oy = 0; oy <= 1; ++oy) {
        const int x = x0 + ox, y = y0 + oy;
        if (x < 0 || y < 0 || x >= size || y >= size) continue;
        w[x * size + y] += (ox ? fx : 1 - fx) * (oy ? fy : 1 - fy);
      }
  }
  return Kernel::normalized(size, std::move(w));
}

Kernel parse_kernel_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw InvalidArgument("kernel spec '" + spec +
                          "' must be gaussian:K:sigma, motion:K:length:angle or file:path");
  }
  const std::string kind = spec.substr(0, colon);
  if (kind == "file") {
    const std::string path = spec.substr(colon + 1);
    if (path.empty()) throw InvalidArgument("kernel spec '" + spec + "': empty path");
    return read_kernel(path);
  }
  const std::vector<std::string> parts = split(spec, ':');
  if (kind == "gaussian") {
    if (parts.size() != 3) throw InvalidArgument("kernel spec '" + spec + "': expected gaussian:K:sigma");
    return gaussian_kernel(parse_size(parts[1], spec), parse_number(parts[2], spec));
  }
  if (kind == "motion") {
    if (parts.size() != 4) {
      throw InvalidArgument("kernel spec '" + spec + "': expected motion:K:length:angle");
    }
    return motion_kernel(parse_size(parts[1], spec), parse_number(parts[2], spec),
                         parse_number(parts[3], spec));
  }
  throw InvalidArgument("kernel spec '" + spec + "': unknown kind '" + kind + "'");
}

Image synthesize(const Image& clean, const Kernel& k, double noise_sigma,
                 std::uint64_t seed, Boundary boundary) {
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
  Image s = convolve(clean, k, boundary);
  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, noise_sigma);
    for (double& v : s.data()) v += n01(rng);
  }
  return s;
}

Image make_pattern(int height, int width, std::uint64_t seed) {
  if (height < 1 || width < 1) throw InvalidArgument("pattern size must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double h = height, w = width;
  Image img(height, width);
  const double gx = 0.2 * (U(rng) - 0.5), gy = 0.2 * (U(rng) - 0.5);
  for (int x = 0; x < height; ++x)
    for (int y = 0; y < width; ++y) img(x, y) = 0.45 + gx * (x / h - 0.5) + gy * (y / w - 0.5);

  for (int r = 0; r < 3; ++r) {
    const double x0 = U(rng) * 0.7 * h, y0 = U(rng) * 0.7 * w;
    const double x1 = x0 + (0.15 + 0.3 * U(rng)) * h, y1 = y0 + (0.15 + 0.3 * U(rng)) * w;
    const double v = 0.15 + 0.7 * U(rng);
    for (int x = 0; x < height; ++x)
      for (int y = 0; y < width; ++y)
        if (x >= x0 && x < x1 && y >= y0 && y < y1) img(x, y) = v;
  }
  for (int c = 0; c < 2; ++c) {
    const double cx = (0.2 + 0.6 * U(rng)) * h, cy = (0.2 + 0.6 * U(rng)) * w;
    const double rad = (0.08 + 0.12 * U(rng)) * std::min(h, w);
    const double v = 0.15 + 0.7 * U(rng);
    for (int x = 0; x < height; ++x)
      for (int y = 0; y < width; ++y) {
        const double d = std::hypot(x - cx, y - cy);
        if (d < rad) img(x, y) = v;
      }
  }
  // Smooth ramp band, so the scene has affine regions as well as edges.
  const double bx = (0.55 + 0.3 * U(rng)) * h;
  for (int x = 0; x < height; ++x)
    for (int y = 0; y < width; ++y)
      if (x >= bx && x < bx + 0.12 * h) img(x, y) = 0.2 + 0.6 * (y / std::max(w - 1.0, 1.0));
  for (double& v : img.data()) v = std::clamp(v, 0.1, 0.9);
  return img;
}

}  // namespace tgvd
