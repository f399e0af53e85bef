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

// Second-order TGV machinery: the shrinkage maps used by the g- and
// h-subproblems, the closed-form q update, and a standalone TGV evaluator.

#include <vector>

#include "tgvdeconv/field.hpp"

namespace tgvd {

struct TgvWeights {
  double gamma0 = 2.0;  // second-order weight, on ||B(q)||
  double gamma1 = 1.0;  // first-order weight, on ||Du - q||

  void validate() const;
};

struct Vec2 {
  double a1 = 0.0;
  double a2 = 0.0;
  bool operator==(const Vec2&) const = default;
};

struct Sym2 {
  double t11 = 0.0;
  double t22 = 0.0;
  double t12 = 0.0;
  bool operator==(const Sym2&) const = default;
};

double norm2(Vec2 a) noexcept;
// Norm of the full symmetric matrix: sqrt(t11^2 + t22^2 + 2 t12^2).
double frobenius_norm(Sym2 b) noexcept;

// Proximal map of phi * ||.||_2: max(||a|| - phi, 0) * a / ||a||.
Vec2 shrink_iso(Vec2 a, double phi);
// Proximal map of phi * ||.||_F on symmetric 2x2 matrices.
Sym2 shrink_frob(Sym2 b, double phi);

// Options shared by the TGV subproblem solvers.
//
// strict_paper_scaling multiplies the shrinkage result by gamma1 (g) or
// gamma0 (h), and weights the q normal equations by gamma1*phi1 and
// gamma0*phi2. Off, every update is the exact minimiser of its subproblem.
struct TgvSubproblemOptions {
  TgvWeights weights;
  double phi1 = 1.0;
  double phi2 = 1.0;
  Boundary boundary = Boundary::circular;
  bool strict_paper_scaling = false;

  void validate() const;
};

// sum_l ||v(l)||_2 and sum_l ||w(l)||_F.
double l1_norm(const VectorField& v);
double l1_norm(const SymTensorField& w);

// gamma1 * ||g||_1 + phi1/2 * ||g - (Du - q) - g_dual||^2
double g_objective(const VectorField& g, const Image& u, const VectorField& q,
                   const VectorField& g_dual, const TgvSubproblemOptions& opt);
// gamma0 * ||h||_1 + phi2/2 * ||h - B(q) - h_dual||_F^2
double h_objective(const SymTensorField& h, const VectorField& q,
                   const SymTensorField& h_dual,
                   const TgvSubproblemOptions& opt);
// phi1/2 * ||g - (Du - q) - g_dual||^2 + phi2/2 * ||h - B(q) - h_dual||_F^2
double q_objective(const VectorField& q, const Image& u, const VectorField& g,
                   const VectorField& g_dual, const SymTensorField& h,
                   const SymTensorField& h_dual,
                   const TgvSubproblemOptions& opt);

VectorField solve_g(const Image& u, const VectorField& q,
                    const VectorField& g_dual, const TgvSubproblemOptions& opt);

SymTensorField solve_h(const VectorField& q, const SymTensorField& h_dual,
                       const TgvSubproblemOptions& opt);

struct QSolveStats {
  int cg_iterations_q1 = 0;
  int cg_iterations_q2 = 0;
  double relative_residual_q1 = 0.0;
  double relative_residual_q2 = 0.0;
};

// One sweep of the q update. Each component solves
//   (a I + b (D1'D1 + D2'D2 / 2)) q1 = k1,   (a I + b (D2'D2 + D1'D1 / 2)) q2 = k3
// by conjugate gradients, with the cross terms D1 q2 and D2 q1 lagged at
// q_prev. Repeating the sweep converges to the joint minimiser of
// q_objective (block Jacobi on an SPD system).
VectorField solve_q(const Image& u, const VectorField& g,
                    const VectorField& g_dual, const SymTensorField& h,
                    const SymTensorField& h_dual, const VectorField& q_prev,
                    const TgvSubproblemOptions& opt,
                    QSolveStats* stats = nullptr);

// Applies one diagonal block of the q normal equations:
// a x + b (D_main' D_main x + 0.5 D_cross' D_cross x).
Image apply_q_block(const Image& x, Axis main_axis, double a, double b,
                    Boundary boundary);

struct TgvValueOptions {
  int inner_iters = 200;
  Boundary boundary = Boundary::circular;
};

// min_q gamma1 ||Du - q||_1 + gamma0 ||B(q)||_1, approximated by ADMM over
// (q, g, h) with u fixed. Returns the best objective seen, so the value is
// non-increasing in inner_iters. Positively homogeneous in u and, under the
// replicate boundary, invariant to adding an affine image.
double tgv_value(const Image& u, const TgvWeights& weights,
                 const TgvValueOptions& opt = {});
// Best-so-far value after each inner iteration (index 0 = initial point).
std::vector<double> tgv_value_trace(const Image& u, const TgvWeights& weights,
                                    const TgvValueOptions& opt = {});

// gamma1 ||Du - q||_1 + gamma0 ||B(q)||_1 for a given q.
double tgv_objective(const Image& u, const VectorField& q,
                     const TgvWeights& weights, Boundary boundary);

}  // namespace tgvd
