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

#include "tgvdeconv/tgv.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "tgvdeconv/error.hpp"

namespace tgvd {

namespace {

constexpr double kCgTolerance = 1e-10;

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidArgument(std::string(name) + " must be positive and finite");
  }
}

void require_shape(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(std::string(what) + ": dimension mismatch");
}

Axis other(Axis a) { return a == Axis::x ? Axis::y : Axis::x; }

// Conjugate gradients for an SPD operator on images.
template <typename Op>
Image conjugate_gradient(const Op& apply, const Image& rhs, Image x,
                         double tolerance, int* iterations, double* rel_res) {
  const double rhs_norm = std::sqrt(squared_norm(rhs));
  *iterations = 0;
  *rel_res = 0.0;
  if (rhs_norm == 0.0) return Image(rhs.height(), rhs.width());
  Image r = rhs - apply(x);
  Image p = r;
  double rr = squared_norm(r);
  const int max_iter = std::max<int>(50, 4 * static_cast<int>(rhs.size()));
  int it = 0;
  while (std::sqrt(rr) > tolerance * rhs_norm && it < max_iter) {
    const Image ap = apply(p);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;
    const double alpha = rr / pap;
    x.add_scaled(p, alpha);
    r.add_scaled(ap, -alpha);
    const double rr_next = squared_norm(r);
    p *= rr_next / rr;
    p += r;
    rr = rr_next;
    ++it;
  }
  *iterations = it;
  *rel_res = std::sqrt(rr) / rhs_norm;
  return x;
}

// Frobenius adjoint of sym_deriv: <B q, w>_F = <q, B*(w)>.
VectorField sym_deriv_frobenius_adjoint(const SymTensorField& w, Boundary b) {
  Image c1 = forward_diff_adjoint(w.t11, Axis::x, b);
  c1 += forward_diff_adjoint(w.t12, Axis::y, b);
  Image c2 = forward_diff_adjoint(w.t22, Axis::y, b);
  c2 += forward_diff_adjoint(w.t12, Axis::x, b);
  return VectorField(std::move(c1), std::move(c2));
}

void check_finite(const Image& v, const char* what) {
  if (!v.all_finite()) {
    throw NumericalError(std::string("solve_q: non-finite values in ") + what);
  }
}

}  // namespace

static void require_setting(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string(name) + " must be positive and finite");
  }
}

void TgvWeights::validate() const {
  require_setting(gamma0, "gamma0");
  require_setting(gamma1, "gamma1");
}

void TgvSubproblemOptions::validate() const {
  weights.validate();
  require_setting(phi1, "phi1");
  require_setting(phi2, "phi2");
}

double norm2(Vec2 a) noexcept { return std::hypot(a.a1, a.a2); }

double frobenius_norm(Sym2 b) noexcept {
  return std::sqrt(b.t11 * b.t11 + b.t22 * b.t22 + 2.0 * b.t12 * b.t12);
}

Vec2 shrink_iso(Vec2 a, double phi) {
  require_positive(phi, "shrink_iso: phi");
  const double n = norm2(a);
  if (n <= phi) return {};
  const double f = (n - phi) / n;
  return {f * a.a1, f * a.a2};
}

Sym2 shrink_frob(Sym2 b, double phi) {
  require_positive(phi, "shrink_frob: phi");
  const double n = frobenius_norm(b);
  if (n <= phi) return {};
  const double f = (n - phi) / n;
  return {f * b.t11, f * b.t22, f * b.t12};
}

double l1_norm(const VectorField& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.c1.size(); ++i) s += std::hypot(v.c1[i], v.c2[i]);
  return s;
}

double l1_norm(const SymTensorField& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.t11.size(); ++i) {
    s += frobenius_norm({w.t11[i], w.t22[i], w.t12[i]});
  }
  return s;
}

double g_objective(const VectorField& g, const Image& u, const VectorField& q,
                   const VectorField& g_dual, const TgvSubproblemOptions& opt) {
  VectorField r = g - grad(u, opt.boundary);
  r += q;
  r -= g_dual;
  return opt.weights.gamma1 * l1_norm(g) + 0.5 * opt.phi1 * squared_norm(r);
}

double h_objective(const SymTensorField& h, const VectorField& q,
                   const SymTensorField& h_dual,
                   const TgvSubproblemOptions& opt) {
  SymTensorField r = h - sym_deriv(q, opt.boundary);
  r -= h_dual;
  return opt.weights.gamma0 * l1_norm(h) +
         0.5 * opt.phi2 * squared_frobenius_norm(r);
}

double q_objective(const VectorField& q, const Image& u, const VectorField& g,
                   const VectorField& g_dual, const SymTensorField& h,
                   const SymTensorField& h_dual,
                   const TgvSubproblemOptions& opt) {
  VectorField rg = g - grad(u, opt.boundary);
  rg += q;
  rg -= g_dual;
  SymTensorField rh = h - sym_deriv(q, opt.boundary);
  rh -= h_dual;
  return 0.5 * opt.phi1 * squared_norm(rg) +
         0.5 * opt.phi2 * squared_frobenius_norm(rh);
}

VectorField solve_g(const Image& u, const VectorField& q,
                    const VectorField& g_dual, const TgvSubproblemOptions& opt) {
  opt.validate();
  require_shape(q.same_shape(u) && g_dual.same_shape(u), "solve_g");
  const VectorField du = grad(u, opt.boundary);
  const double threshold = opt.weights.gamma1 / opt.phi1;
  const double scale = opt.strict_paper_scaling ? opt.weights.gamma1 : 1.0;
  VectorField g(u.height(), u.width());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const Vec2 a{du.c1[i] - q.c1[i] + g_dual.c1[i],
                 du.c2[i] - q.c2[i] + g_dual.c2[i]};
    const Vec2 s = shrink_iso(a, threshold);
    g.c1[i] = scale * s.a1;
    g.c2[i] = scale * s.a2;
  }
  return g;
}

SymTensorField solve_h(const VectorField& q, const SymTensorField& h_dual,
                       const TgvSubproblemOptions& opt) {
  opt.validate();
  require_shape(h_dual.same_shape(q.c1) && q.c2.same_shape(q.c1), "solve_h");
  const SymTensorField bq = sym_deriv(q, opt.boundary);
  const double threshold = opt.weights.gamma0 / opt.phi2;
  const double scale = opt.strict_paper_scaling ? opt.weights.gamma0 : 1.0;
  SymTensorField h(q.height(), q.width());
  for (std::size_t i = 0; i < bq.t11.size(); ++i) {
    const Sym2 b{bq.t11[i] + h_dual.t11[i], bq.t22[i] + h_dual.t22[i],
                 bq.t12[i] + h_dual.t12[i]};
    const Sym2 s = shrink_frob(b, threshold);
    h.t11[i] = scale * s.t11;
    h.t22[i] = scale * s.t22;
    h.t12[i] = scale * s.t12;
  }
  return h;
}

Image apply_q_block(const Image& x, Axis main_axis, double a, double b,
                    Boundary boundary) {
  const Axis cross = other(main_axis);
  Image out = x * a;
  out.add_scaled(forward_diff_adjoint(forward_diff(x, main_axis, boundary),
                                      main_axis, boundary),
                 b);
  out.add_scaled(
      forward_diff_adjoint(forward_diff(x, cross, boundary), cross, boundary),
      0.5 * b);
  return out;
}

VectorField solve_q(const Image& u, const VectorField& g,
                    const VectorField& g_dual, const SymTensorField& h,
                    const SymTensorField& h_dual, const VectorField& q_prev,
                    const TgvSubproblemOptions& opt, QSolveStats* stats) {
  opt.validate();
  require_shape(g.same_shape(u) && g_dual.same_shape(u) && h.same_shape(u) &&
                    h_dual.same_shape(u) && q_prev.same_shape(u),
                "solve_q");
  const Boundary bd = opt.boundary;
  const double a = opt.strict_paper_scaling ? opt.weights.gamma1 * opt.phi1
                                            : opt.phi1;
  const double b = opt.strict_paper_scaling ? opt.weights.gamma0 * opt.phi2
                                            : opt.phi2;

  const Image h3 = h.t12 - h_dual.t12;

  // k1 = a (D1 u - g1 + g~1) + b (D1'(h1 - h~1) + D2'(h3 - h~3 - D1 q2 / 2))
  Image k1 = forward_diff(u, Axis::x, bd) - g.c1 + g_dual.c1;
  k1 *= a;
  Image cross1 = h3;
  cross1.add_scaled(forward_diff(q_prev.c2, Axis::x, bd), -0.5);
  Image lift1 = forward_diff_adjoint(h.t11 - h_dual.t11, Axis::x, bd);
  lift1 += forward_diff_adjoint(cross1, Axis::y, bd);
  k1.add_scaled(lift1, b);

  // k3 = a (D2 u - g2 + g~2) + b (D2'(h2 - h~2) + D1'(h3 - h~3 - D2 q1 / 2))
  Image k3 = forward_diff(u, Axis::y, bd) - g.c2 + g_dual.c2;
  k3 *= a;
  Image cross2 = h3;
  cross2.add_scaled(forward_diff(q_prev.c1, Axis::y, bd), -0.5);
  Image lift2 = forward_diff_adjoint(h.t22 - h_dual.t22, Axis::y, bd);
  lift2 += forward_diff_adjoint(cross2, Axis::x, bd);
  k3.add_scaled(lift2, b);

  check_finite(k1, "k1");
  check_finite(k3, "k3");

  QSolveStats local;
  Image q1 = conjugate_gradient(
      [&](const Image& x) { return apply_q_block(x, Axis::x, a, b, bd); }, k1,
      q_prev.c1, kCgTolerance, &local.cg_iterations_q1,
      &local.relative_residual_q1);
  Image q2 = conjugate_gradient(
      [&](const Image& x) { return apply_q_block(x, Axis::y, a, b, bd); }, k3,
      q_prev.c2, kCgTolerance, &local.cg_iterations_q2,
      &local.relative_residual_q2);
  check_finite(q1, "q1");
  check_finite(q2, "q2");
  if (stats) *stats = local;
  return VectorField(std::move(q1), std::move(q2));
}

double tgv_objective(const Image& u, const VectorField& q,
                     const TgvWeights& weights, Boundary boundary) {
  VectorField r = grad(u, boundary) - q;
  return weights.gamma1 * l1_norm(r) +
         weights.gamma0 * l1_norm(sym_deriv(q, boundary));
}

std::vector<double> tgv_value_trace(const Image& u, const TgvWeights& weights,
                                    const TgvValueOptions& opt) {
  weights.validate();
  if (opt.inner_iters < 1) throw InvalidArgument("tgv_value: inner_iters >= 1");
  const Boundary bd = opt.boundary;
  const int h = u.height(), w = u.width();
  const double n = static_cast<double>(u.size());
  const VectorField du = grad(u, bd);

  // Start from the mean gradient. With replicate boundary the gradient of an
  // affine image is exactly this constant field and B of it vanishes.
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    m1 += du.c1[i];
    m2 += du.c2[i];
  }
  m1 /= n;
  m2 /= n;
  VectorField q(Image(h, w, m1), Image(h, w, m2));

  double spread = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = du.c1[i] - m1, c = du.c2[i] - m2;
    spread += a * a + c * c;
  }
  spread = std::sqrt(spread / n);

  double best = tgv_objective(u, q, weights, bd);
  std::vector<double> trace{best};
  trace.reserve(opt.inner_iters + 1);
  if (spread == 0.0) {
    trace.resize(opt.inner_iters + 1, best);
    return trace;
  }

  // Penalties scale with 1/spread so the iterates are equivariant under
  // u -> alpha u.
  TgvSubproblemOptions sub;
  sub.weights = weights;
  sub.phi1 = weights.gamma1 / spread;
  sub.phi2 = weights.gamma0 / spread;
  sub.boundary = bd;

  VectorField g_dual(h, w);
  SymTensorField h_dual(h, w);
  const auto normal_op = [&](const VectorField& x) {
    VectorField out = sub.phi1 * x;
    out.add_scaled(sym_deriv_frobenius_adjoint(sym_deriv(x, bd), bd), sub.phi2);
    return out;
  };

  for (int it = 0; it < opt.inner_iters; ++it) {
    const VectorField g = solve_g(u, q, g_dual, sub);
    const SymTensorField hh = solve_h(q, h_dual, sub);

    // Exact joint q minimiser by CG on (phi1 I + phi2 B*B) q = rhs.
    VectorField rhs = du - g + g_dual;
    rhs *= sub.phi1;
    rhs.add_scaled(sym_deriv_frobenius_adjoint(hh - h_dual, bd), sub.phi2);
    {
      const double rhs_norm = std::sqrt(squared_norm(rhs));
      VectorField r = rhs - normal_op(q);
      VectorField p = r;
      double rr = squared_norm(r);
      for (int k = 0; k < 2000 && std::sqrt(rr) > 1e-12 * rhs_norm; ++k) {
        const VectorField ap = normal_op(p);
        const double alpha = rr / dot(p, ap);
        q.add_scaled(p, alpha);
        r.add_scaled(ap, -alpha);
        const double rr_next = squared_norm(r);
        p *= rr_next / rr;
        p += r;
        rr = rr_next;
      }
    }

    VectorField rg = du - q;
    rg -= g;
    g_dual += rg;
    SymTensorField rh = sym_deriv(q, bd) - hh;
    h_dual += rh;

    best = std::min(best, tgv_objective(u, q, weights, bd));
    trace.push_back(best);
  }
  return trace;
}

double tgv_value(const Image& u, const TgvWeights& weights,
                 const TgvValueOptions& opt) {
  return tgv_value_trace(u, weights, opt).back();
}

}  // namespace tgvd
