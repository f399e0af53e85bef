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

#pragma once

// Dense 2-D fields and the linear operators the solver is built from.
//
// Index convention used everywhere in the project: x is the row index
// (0..height-1), y is the column index (0..width-1). Samples are stored
// row-major, so (x, y) lives at data[x * width + y]. D1 differences along x
// (between consecutive rows), D2 along y (between consecutive columns).

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace tgvd {

enum class Boundary {
  // Periodic extension. Every operator and its adjoint wrap around.
  circular,
  // Edge extension. Convolution clamps sample indices; the last forward
  // difference along an axis repeats the previous one, so affine images have
  // exactly constant differences.
  replicate,
};

Boundary parse_boundary(std::string_view name);
std::string_view to_string(Boundary b);

class Image {
 public:
  Image() = default;
  Image(int height, int width, double fill = 0.0);
  Image(int height, int width, std::vector<double> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int x, int y) noexcept {
    return data_[static_cast<std::size_t>(x) * width_ + y];
  }
  double operator()(int x, int y) const noexcept {
    return data_[static_cast<std::size_t>(x) * width_ + y];
  }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool same_shape(const Image& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_;
  }
  bool all_finite() const noexcept;

  Image& operator+=(const Image& o);
  Image& operator-=(const Image& o);
  Image& operator*=(double s) noexcept;
  // this += s * o
  Image& add_scaled(const Image& o, double s);

  friend Image operator+(Image a, const Image& b) { return a += b; }
  friend Image operator-(Image a, const Image& b) { return a -= b; }
  friend Image operator*(Image a, double s) { return a *= s; }
  friend Image operator*(double s, Image a) { return a *= s; }

  bool operator==(const Image&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// Odd-sized, nonnegative, unit-sum blur kernel. Construction validates.
class Kernel {
 public:
  static constexpr double kSumTolerance = 1e-9;

  Kernel() : Kernel(1, std::vector<double>{1.0}) {}
  Kernel(int size, std::vector<double> weights);

  static Kernel identity(int size = 1);
  static Kernel uniform(int size);
  // Clamps negatives to zero and rescales to unit sum.
  static Kernel normalized(int size, std::vector<double> weights);

  int size() const noexcept { return size_; }
  int radius() const noexcept { return size_ / 2; }
  double operator()(int i, int j) const noexcept {
    return weights_[static_cast<std::size_t>(i) * size_ + j];
  }
  std::span<const double> data() const noexcept { return weights_; }
  const std::vector<double>& values() const noexcept { return weights_; }
  Image as_image() const;

  bool operator==(const Kernel&) const = default;

 private:
  int size_ = 1;
  std::vector<double> weights_;
};

struct VectorField {
  Image c1;
  Image c2;

  VectorField() = default;
  VectorField(int height, int width) : c1(height, width), c2(height, width) {}
  VectorField(Image a, Image b);

  int height() const noexcept { return c1.height(); }
  int width() const noexcept { return c1.width(); }
  bool same_shape(const Image& u) const noexcept {
    return c1.same_shape(u) && c2.same_shape(u);
  }
  bool all_finite() const noexcept {
    return c1.all_finite() && c2.all_finite();
  }

  VectorField& operator+=(const VectorField& o);
  VectorField& operator-=(const VectorField& o);
  VectorField& operator*=(double s) noexcept;
  VectorField& add_scaled(const VectorField& o, double s);
  friend VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
  friend VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
  friend VectorField operator*(double s, VectorField a) { return a *= s; }

  bool operator==(const VectorField&) const = default;
};

// Symmetric 2x2 tensor per pixel: [t11 t12; t12 t22]. The off-diagonal is
// stored once.
struct SymTensorField {
  Image t11;
  Image t22;
  Image t12;

  SymTensorField() = default;
  SymTensorField(int height, int width)
      : t11(height, width), t22(height, width), t12(height, width) {}
  SymTensorField(Image a11, Image a22, Image a12);

  int height() const noexcept { return t11.height(); }
  int width() const noexcept { return t11.width(); }
  bool same_shape(const Image& u) const noexcept {
    return t11.same_shape(u) && t22.same_shape(u) && t12.same_shape(u);
  }
  bool all_finite() const noexcept {
    return t11.all_finite() && t22.all_finite() && t12.all_finite();
  }

  SymTensorField& operator+=(const SymTensorField& o);
  SymTensorField& operator-=(const SymTensorField& o);
  SymTensorField& operator*=(double s) noexcept;
  SymTensorField& add_scaled(const SymTensorField& o, double s);
  friend SymTensorField operator+(SymTensorField a, const SymTensorField& b) { return a += b; }
  friend SymTensorField operator-(SymTensorField a, const SymTensorField& b) { return a -= b; }
  friend SymTensorField operator*(double s, SymTensorField a) { return a *= s; }

  bool operator==(const SymTensorField&) const = default;
};

// Inner products over the stored samples.
double dot(const Image& a, const Image& b);
double dot(const VectorField& a, const VectorField& b);
double dot(const SymTensorField& a, const SymTensorField& b);
// Sum over pixels of the full-matrix Frobenius product (t12 counted twice).
double frobenius_dot(const SymTensorField& a, const SymTensorField& b);

double squared_norm(const Image& a);
double squared_norm(const VectorField& a);
// Full-matrix Frobenius norm squared, i.e. frobenius_dot(a, a).
double squared_frobenius_norm(const SymTensorField& a);

// "Same" 2-D convolution with the kernel centred:
//   out(x, y) = sum_{i,j} k(i, j) * u(x - i + r, y - j + r),  r = K / 2.
Image convolve(const Image& u, const Kernel& k, Boundary boundary);
// Same, with an arbitrary odd square weight array (no normalisation).
Image convolve(const Image& u, const Image& weights, Boundary boundary);
// Adjoint in u of convolve(., weights): correlation with the weights.
Image convolve_adjoint(const Image& r, const Image& weights, Boundary boundary);
// Gradient with respect to the weights of <r, convolve(u, weights)>.
Image convolve_weight_gradient(const Image& r, const Image& u, int kernel_size,
                               Boundary boundary);

enum class Axis { x, y };

// Forward difference along one axis (D1 for Axis::x, D2 for Axis::y).
Image forward_diff(const Image& u, Axis axis, Boundary boundary);
Image forward_diff_adjoint(const Image& v, Axis axis, Boundary boundary);

// For the forward difference at index i of an axis of length n, returns
// (plus, minus) such that diff(i) = u(plus) - u(minus). plus == minus marks a
// structurally zero difference.
struct DiffStencil {
  int plus;
  int minus;
};
DiffStencil diff_stencil(int i, int n, Boundary boundary) noexcept;

VectorField grad(const Image& u, Boundary boundary);
Image grad_adjoint(const VectorField& v, Boundary boundary);

// B(q) = [D1 q1, (D2 q1 + D1 q2)/2; (D2 q1 + D1 q2)/2, D2 q2].
SymTensorField sym_deriv(const VectorField& q, Boundary boundary);
// Adjoint of sym_deriv under dot(SymTensorField, SymTensorField).
VectorField sym_deriv_adjoint(const SymTensorField& w, Boundary boundary);

}  // namespace tgvd
