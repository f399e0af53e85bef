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

// Outer ADMM loop over the TGV splitting. Each iteration updates g, h, the
// image (and kernel), q, then both multipliers.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tgvdeconv/error.hpp"
#include "tgvdeconv/field.hpp"
#include "tgvdeconv/tgv.hpp"
#include "tgvdeconv/variational.hpp"

namespace tgvd {

struct AdmmConfig {
  TgvWeights weights;
  double phi1 = 1.0;
  double phi2 = 1.0;
  double beta = 1e4;
  double mu = 1.0;
  int outer_iters = 40;
  int inner_steps = 25;
  // Jacobi sweeps of the q update per outer iteration.
  int q_sweeps = 1;
  Boundary boundary = Boundary::circular;
  std::uint64_t seed = 0;
  bool strict_paper_scaling = false;
  // Stop once both relative primal residuals fall below this; 0 disables.
  double early_stop_tol = 0.0;
  PriorConfig prior;

  // mu may be zero (frozen multipliers); every other scalar must be positive.
  void validate() const;
  TgvSubproblemOptions subproblem_options() const;
};

struct IterationRecord {
  int iteration = 0;  // 1-based
  double loss = 0.0;       // image subproblem loss, ADMM penalty included
  double objective = 0.0;  // the same without the penalty
  double residual_g = 0.0;  // ||Du - q - g||
  double residual_h = 0.0;  // ||B(q) - h||
  double kernel_entropy = 0.0;
};

struct Diagnostics {
  std::vector<IterationRecord> records;
  long optimiser_steps = 0;
  bool early_stopped = false;
};

// Image (and kernel) update given the current splitting variables.
class USubproblemSolver {
 public:
  struct Output {
    Image u;
    Kernel k;
    double loss = 0.0;
    double objective = 0.0;
  };

  virtual ~USubproblemSolver() = default;
  virtual Output solve(const Image& s, const AdmmCoupling& coupling,
                       double beta, int inner_steps) = 0;
  virtual Kernel kernel() const = 0;
  virtual long steps() const = 0;
};

// The variational generator pair.
class VariationalUSolver : public USubproblemSolver {
 public:
  explicit VariationalUSolver(VariationalPrior prior) : prior_(std::move(prior)) {}

  Output solve(const Image& s, const AdmmCoupling& coupling, double beta,
               int inner_steps) override;
  Kernel kernel() const override { return prior_.kernel_mean(); }
  long steps() const override { return prior_.steps(); }

  VariationalPrior& prior() noexcept { return prior_; }
  const VariationalPrior& prior() const noexcept { return prior_; }

 private:
  VariationalPrior prior_;
};

// Deterministic stand-in: exact minimiser over u of
//   beta/2 ||k (x) u - s||^2 + phi1/2 ||g - (Du - q) - g_dual||^2
// by conjugate gradients, with the kernel held fixed.
class QuadraticUSolver : public USubproblemSolver {
 public:
  explicit QuadraticUSolver(Kernel k, double tolerance = 1e-12)
      : k_(std::move(k)), tol_(tolerance) {}

  Output solve(const Image& s, const AdmmCoupling& coupling, double beta,
               int inner_steps) override;
  Kernel kernel() const override { return k_; }
  long steps() const override { return steps_; }

 private:
  Kernel k_;
  double tol_;
  long steps_ = 0;
};

struct AdmmState {
  Image u;
  Kernel k;
  VectorField q, g, g_dual;
  SymTensorField h, h_dual;
  std::shared_ptr<USubproblemSolver> usolver;
  int iteration = 0;
  std::vector<double> residual_g_history;
  std::vector<double> residual_h_history;
};

// u0 = s, all auxiliary fields and multipliers zero. A blind state owns a
// freshly seeded generator pair; a non-blind one holds the known kernel.
AdmmState init_state(const Image& s, int kernel_size, const AdmmConfig& config);
AdmmState init_state_nonblind(const Image& s, const Kernel& k,
                              const AdmmConfig& config);
// Uses an externally provided image solver (testing, custom priors).
AdmmState init_state_with(const Image& s, std::shared_ptr<USubproblemSolver> solver,
                          const AdmmConfig& config);

struct StepHooks {
  // Receives the name of each subproblem as it runs.
  std::function<void(std::string_view)> trace;
};

// One outer iteration. Numerical errors are rethrown with the iteration index.
IterationRecord step(AdmmState& state, const Image& s, const AdmmConfig& config,
                     const StepHooks& hooks = {});

// beta/2 ||k (x) u - s||^2 + gamma1 ||g||_1 + gamma0 ||h||_F,1
//   + phi1/2 (||g - (Du - q) - g_dual||^2 - ||g_dual||^2)
//   + phi2/2 (||h - B(q) - h_dual||^2 - ||h_dual||^2)
double augmented_lagrangian(const AdmmState& state, const Image& s,
                            const AdmmConfig& config);

double kernel_entropy(const Kernel& k);

// Thrown by the solve_* drivers; carries the diagnostics gathered before the
// failure.
class SolveFailure : public Error {
 public:
  SolveFailure(ErrorKind kind, const std::string& what, Diagnostics partial)
      : Error(kind, what), partial_(std::move(partial)) {}
  const Diagnostics& diagnostics() const noexcept { return partial_; }

 private:
  Diagnostics partial_;
};

struct SolveResult {
  Image u;    // clipped to [0, 1]
  Kernel k;   // on the simplex
  Diagnostics diagnostics;
  AdmmState state;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

SolveResult solve_blind(const Image& s, int kernel_size, const AdmmConfig& config,
                        const IterationCallback& on_iteration = {});
SolveResult solve_nonblind(const Image& s, const Kernel& k_known,
                           const AdmmConfig& config,
                           const IterationCallback& on_iteration = {});
// Runs the loop on a prepared state.
SolveResult run(AdmmState state, const Image& s, const AdmmConfig& config,
                const IterationCallback& on_iteration = {});

Image clip_unit(const Image& u);

}  // namespace tgvd
