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

#include "tgvdeconv/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tgvdeconv/error.hpp"

namespace tgvd {

namespace {

void require_same(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw InvalidArgument(std::string(what) + ": dimension mismatch (" +
                          std::to_string(a.height()) + "x" +
                          std::to_string(a.width()) + " vs " +
                          std::to_string(b.height()) + "x" +
                          std::to_string(b.width()) + ")");
  }
}

inline int wrap(int i, int n) noexcept {
  i %= n;
  return i < 0 ? i + n : i;
}

inline int clamp_index(int i, int n) noexcept {
  return i < 0 ? 0 : (i >= n ? n - 1 : i);
}

inline int extend(int i, int n, Boundary b) noexcept {
  return b == Boundary::circular ? wrap(i, n) : clamp_index(i, n);
}

void check_weights(const Image& u, const Image& w) {
  if (w.height() != w.width() || w.height() % 2 == 0) {
    throw InvalidArgument("convolve: kernel must be square with odd size");
  }
  if (w.height() > std::min(u.height(), u.width())) {
    throw InvalidArgument("convolve: kernel size " +
                          std::to_string(w.height()) +
                          " exceeds image dimension");
  }
}

}  // namespace

Boundary parse_boundary(std::string_view name) {
  if (name == "circular") return Boundary::circular;
  if (name == "replicate") return Boundary::replicate;
  throw ConfigError("unknown boundary mode '" + std::string(name) + "'");
}

std::string_view to_string(Boundary b) {
  return b == Boundary::circular ? "circular" : "replicate";
}

// ---------------------------------------------------------------------------
// Image

Image::Image(int height, int width, double fill) : height_(height), width_(width) {
  if (height < 1 || width < 1) {
    throw InvalidArgument("image dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(height) * width, fill);
}

Image::Image(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height < 1 || width < 1) {
    throw InvalidArgument("image dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(height) * width) {
    throw InvalidArgument("image data length does not match dimensions");
  }
}

bool Image::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Image& Image::operator+=(const Image& o) {
  require_same(*this, o, "image +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Image& Image::operator-=(const Image& o) {
  require_same(*this, o, "image -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Image& Image::operator*=(double s) noexcept {
  for (double& v : data_) v *= s;
  return *this;
}

Image& Image::add_scaled(const Image& o, double s) {
  require_same(*this, o, "image add_scaled");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
  return *this;
}

// ---------------------------------------------------------------------------
// Kernel

Kernel::Kernel(int size, std::vector<double> weights)
    : size_(size), weights_(std::move(weights)) {
  if (size < 1 || size % 2 == 0) {
    throw InvalidArgument("kernel size must be odd and positive, got " +
                          std::to_string(size));
  }
  if (weights_.size() != static_cast<std::size_t>(size) * size) {
    throw InvalidArgument("kernel data length does not match size");
  }
  double sum = 0.0;
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0) {
      throw InvalidArgument("kernel weights must be finite and nonnegative");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw InvalidArgument("kernel weights must sum to 1 (got " +
                          std::to_string(sum) + ")");
  }
}

Kernel Kernel::identity(int size) {
  std::vector<double> w(static_cast<std::size_t>(size) * size, 0.0);
  if (size >= 1 && size % 2 == 1) w[w.size() / 2] = 1.0;
  return Kernel(size, std::move(w));
}

Kernel Kernel::uniform(int size) {
  const std::size_t n = static_cast<std::size_t>(size) * size;
  return Kernel(size, std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Kernel Kernel::normalized(int size, std::vector<double> weights) {
  double sum = 0.0;
  for (double& w : weights) {
    if (!std::isfinite(w)) throw InvalidArgument("kernel weight is not finite");
    w = std::max(w, 0.0);
    sum += w;
  }
  if (sum <= 0.0) throw InvalidArgument("kernel has no positive mass");
  for (double& w : weights) w /= sum;
  return Kernel(size, std::move(weights));
}

Image Kernel::as_image() const { return Image(size_, size_, weights_); }

// ---------------------------------------------------------------------------
// VectorField / SymTensorField

VectorField::VectorField(Image a, Image b) : c1(std::move(a)), c2(std::move(b)) {
  require_same(c1, c2, "VectorField");
}

VectorField& VectorField::operator+=(const VectorField& o) {
  c1 += o.c1;
  c2 += o.c2;
  return *this;
}
VectorField& VectorField::operator-=(const VectorField& o) {
  c1 -= o.c1;
  c2 -= o.c2;
  return *this;
}
VectorField& VectorField::operator*=(double s) noexcept {
  c1 *= s;
  c2 *= s;
  return *this;
}
VectorField& VectorField::add_scaled(const VectorField& o, double s) {
  c1.add_scaled(o.c1, s);
  c2.add_scaled(o.c2, s);
  return *this;
}

SymTensorField::SymTensorField(Image a11, Image a22, Image a12)
    : t11(std::move(a11)), t22(std::move(a22)), t12(std::move(a12)) {
  require_same(t11, t22, "SymTensorField");
  require_same(t11, t12, "SymTensorField");
}

SymTensorField& SymTensorField::operator+=(const SymTensorField& o) {
  t11 += o.t11;
  t22 += o.t22;
  t12 += o.t12;
  return *this;
}
SymTensorField& SymTensorField::operator-=(const SymTensorField& o) {
  t11 -= o.t11;
  t22 -= o.t22;
  t12 -= o.t12;
  return *this;
}
SymTensorField& SymTensorField::operator*=(double s) noexcept {
  t11 *= s;
  t22 *= s;
  t12 *= s;
  return *this;
}
SymTensorField& SymTensorField::add_scaled(const SymTensorField& o, double s) {
  t11.add_scaled(o.t11, s);
  t22.add_scaled(o.t22, s);
  t12.add_scaled(o.t12, s);
  return *this;
}

double dot(const Image& a, const Image& b) {
  require_same(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double dot(const VectorField& a, const VectorField& b) {
  return dot(a.c1, b.c1) + dot(a.c2, b.c2);
}

double dot(const SymTensorField& a, const SymTensorField& b) {
  return dot(a.t11, b.t11) + dot(a.t22, b.t22) + dot(a.t12, b.t12);
}

double frobenius_dot(const SymTensorField& a, const SymTensorField& b) {
  return dot(a.t11, b.t11) + dot(a.t22, b.t22) + 2.0 * dot(a.t12, b.t12);
}

double squared_norm(const Image& a) { return dot(a, a); }
double squared_norm(const VectorField& a) { return dot(a, a); }
double squared_frobenius_norm(const SymTensorField& a) {
  return frobenius_dot(a, a);
}

// ---------------------------------------------------------------------------
// Convolution

Image convolve(const Image& u, const Kernel& k, Boundary boundary) {
  return convolve(u, k.as_image(), boundary);
}

Image convolve(const Image& u, const Image& weights, Boundary boundary) {
  check_weights(u, weights);
  const int h = u.height(), w = u.width();
  const int ks = weights.height(), r = ks / 2;
  Image out(h, w);
  for (int x = 0; x < h; ++x) {
    for (int y = 0; y < w; ++y) {
      double acc = 0.0;
      for (int i = 0; i < ks; ++i) {
        const int sx = extend(x - i + r, h, boundary);
        for (int j = 0; j < ks; ++j) {
          acc += weights(i, j) * u(sx, extend(y - j + r, w, boundary));
        }
      }
      out(x, y) = acc;
    }
  }
  return out;
}

Image convolve_adjoint(const Image& rr, const Image& weights, Boundary boundary) {
  check_weights(rr, weights);
  const int h = rr.height(), w = rr.width();
  const int ks = weights.height(), r = ks / 2;
  Image out(h, w);
  if (boundary == Boundary::circular) {
    // Periodic: the adjoint is a plain correlation, gathered per pixel.
    for (int x = 0; x < h; ++x) {
      for (int y = 0; y < w; ++y) {
        double acc = 0.0;
        for (int i = 0; i < ks; ++i) {
          const int sx = wrap(x + i - r, h);
          for (int j = 0; j < ks; ++j) {
            acc += weights(i, j) * rr(sx, wrap(y + j - r, w));
          }
        }
        out(x, y) = acc;
      }
    }
    return out;
  }
  for (int x = 0; x < h; ++x) {
    for (int y = 0; y < w; ++y) {
      const double v = rr(x, y);
      for (int i = 0; i < ks; ++i) {
        const int sx = clamp_index(x - i + r, h);
        for (int j = 0; j < ks; ++j) {
          out(sx, clamp_index(y - j + r, w)) += weights(i, j) * v;
        }
      }
    }
  }
  return out;
}

Image convolve_weight_gradient(const Image& rr, const Image& u, int kernel_size,
                               Boundary boundary) {
  require_same(rr, u, "convolve_weight_gradient");
  check_weights(u, Image(kernel_size, kernel_size));
  const int h = u.height(), w = u.width();
  const int r = kernel_size / 2;
  Image g(kernel_size, kernel_size);
  for (int i = 0; i < kernel_size; ++i) {
    for (int j = 0; j < kernel_size; ++j) {
      double acc = 0.0;
      for (int x = 0; x < h; ++x) {
        const int sx = extend(x - i + r, h, boundary);
        for (int y = 0; y < w; ++y) {
          acc += rr(x, y) * u(sx, extend(y - j + r, w, boundary));
        }
      }
      g(i, j) = acc;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Differences

DiffStencil diff_stencil(int i, int n, Boundary boundary) noexcept {
  if (n == 1) return {i, i};
  if (boundary == Boundary::circular) return {(i + 1) % n, i};
  if (i < n - 1) return {i + 1, i};
  return {n - 1, n - 2};
}

Image forward_diff(const Image& u, Axis axis, Boundary boundary) {
  const int h = u.height(), w = u.width();
  Image out(h, w);
  if (axis == Axis::x) {
    for (int x = 0; x < h; ++x) {
      const DiffStencil s = diff_stencil(x, h, boundary);
      for (int y = 0; y < w; ++y) out(x, y) = u(s.plus, y) - u(s.minus, y);
    }
  } else {
    for (int y = 0; y < w; ++y) {
      const DiffStencil s = diff_stencil(y, w, boundary);
      for (int x = 0; x < h; ++x) out(x, y) = u(x, s.plus) - u(x, s.minus);
    }
  }
  return out;
}

Image forward_diff_adjoint(const Image& v, Axis axis, Boundary boundary) {
  const int h = v.height(), w = v.width();
  Image out(h, w);
  if (axis == Axis::x) {
    for (int x = 0; x < h; ++x) {
      const DiffStencil s = diff_stencil(x, h, boundary);
      if (s.plus == s.minus) continue;
      for (int y = 0; y < w; ++y) {
        out(s.plus, y) += v(x, y);
        out(s.minus, y) -= v(x, y);
      }
    }
  } else {
    for (int y = 0; y < w; ++y) {
      const DiffStencil s = diff_stencil(y, w, boundary);
      if (s.plus == s.minus) continue;
      for (int x = 0; x < h; ++x) {
        out(x, s.plus) += v(x, y);
        out(x, s.minus) -= v(x, y);
      }
    }
  }
  return out;
}

VectorField grad(const Image& u, Boundary boundary) {
  return VectorField(forward_diff(u, Axis::x, boundary),
                     forward_diff(u, Axis::y, boundary));
}

Image grad_adjoint(const VectorField& v, Boundary boundary) {
  Image out = forward_diff_adjoint(v.c1, Axis::x, boundary);
  out += forward_diff_adjoint(v.c2, Axis::y, boundary);
  return out;
}

SymTensorField sym_deriv(const VectorField& q, Boundary boundary) {
  Image t12 = forward_diff(q.c1, Axis::y, boundary);
  t12 += forward_diff(q.c2, Axis::x, boundary);
  t12 *= 0.5;
  return SymTensorField(forward_diff(q.c1, Axis::x, boundary),
                        forward_diff(q.c2, Axis::y, boundary), std::move(t12));
}

VectorField sym_deriv_adjoint(const SymTensorField& w, Boundary boundary) {
  Image c1 = forward_diff_adjoint(w.t11, Axis::x, boundary);
  c1.add_scaled(forward_diff_adjoint(w.t12, Axis::y, boundary), 0.5);
  Image c2 = forward_diff_adjoint(w.t22, Axis::y, boundary);
  c2.add_scaled(forward_diff_adjoint(w.t12, Axis::x, boundary), 0.5);
  return VectorField(std::move(c1), std::move(c2));
}

}  // namespace tgvd
