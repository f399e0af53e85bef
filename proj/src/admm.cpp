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

#include "tgvdeconv/admm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tgvdeconv/parallel.hpp"

namespace tgvd {

void AdmmConfig::validate() const {
  weights.validate();
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string(name) + " must be a positive finite number");
    }
  };
  positive(phi1, "phi1");
  positive(phi2, "phi2");
  positive(beta, "beta");
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw ConfigError("mu must be >= 0");
  if (outer_iters < 1) throw ConfigError("outer_iters must be >= 1");
  if (inner_steps < 1) throw ConfigError("inner_steps must be >= 1");
  if (q_sweeps < 1) throw ConfigError("q_sweeps must be >= 1");
  if (!(early_stop_tol >= 0.0)) throw ConfigError("early_stop_tol must be >= 0");
  prior.validate();
}

TgvSubproblemOptions AdmmConfig::subproblem_options() const {
  TgvSubproblemOptions o;
  o.weights = weights;
  o.phi1 = phi1;
  o.phi2 = phi2;
  o.boundary = boundary;
  o.strict_paper_scaling = strict_paper_scaling;
  return o;
}

USubproblemSolver::Output VariationalUSolver::solve(const Image& s,
                                                    const AdmmCoupling& coupling,
                                                    double beta, int inner_steps) {
  USubproblemResult r = prior_.solve(s, coupling, beta, inner_steps);
  return {std::move(r.u_mean), std::move(r.k_mean), r.losses.back(),
          r.last_terms.negative_elbo()};
}

USubproblemSolver::Output QuadraticUSolver::solve(const Image& s,
                                                  const AdmmCoupling& c,
                                                  double beta, int) {
  const Boundary bd = c.boundary;
  const Image kimg = k_.as_image();
  auto apply = [&](const Image& x) {
    Image y = convolve_adjoint(convolve(x, kimg, bd), kimg, bd);
    y *= beta;
    y.add_scaled(grad_adjoint(grad(x, bd), bd), c.phi1);
    return y;
  };
  VectorField t = *c.g + *c.q;
  t -= *c.g_dual;
  Image b = convolve_adjoint(s, kimg, bd);
  b *= beta;
  b.add_scaled(grad_adjoint(t, bd), c.phi1);

  Image x = s;
  Image r = b - apply(x);
  Image p = r;
  double rr = squared_norm(r);
  const double bnorm = std::max(std::sqrt(squared_norm(b)), 1e-300);
  for (std::size_t it = 0; it < 4 * s.size() + 50 && std::sqrt(rr) > tol_ * bnorm; ++it) {
    const Image ap = apply(p);
    const double alpha = rr / dot(p, ap);
    x.add_scaled(p, alpha);
    r.add_scaled(ap, -alpha);
    const double rr_new = squared_norm(r);
    p *= rr_new / rr;
    p += r;
    rr = rr_new;
  }
  if (!x.all_finite()) throw NumericalError("quadratic u-solve produced non-finite values");
  ++steps_;

  Image res = convolve(x, kimg, bd) - s;
  VectorField e = t - grad(x, bd);
  const double fit = 0.5 * beta * squared_norm(res);
  return {std::move(x), k_, fit + 0.5 * c.phi1 * squared_norm(e), fit};
}

namespace {

AdmmState blank_state(const Image& s, const AdmmConfig& config) {
  if (s.empty()) throw InvalidArgument("observation is empty");
  if (!s.all_finite()) throw InvalidArgument("observation contains non-finite values");
  config.validate();
  AdmmState st;
  st.u = s;
  const int h = s.height(), w = s.width();
  st.q = VectorField(h, w);
  st.g = VectorField(h, w);
  st.g_dual = VectorField(h, w);
  st.h = SymTensorField(h, w);
  st.h_dual = SymTensorField(h, w);
  return st;
}

double field_norm(const VectorField& v) { return std::sqrt(squared_norm(v)); }
double field_norm(const SymTensorField& t) {
  return std::sqrt(squared_frobenius_norm(t));
}

}  // namespace

AdmmState init_state(const Image& s, int kernel_size, const AdmmConfig& config) {
  if (kernel_size < 1 || kernel_size % 2 == 0 ||
      kernel_size > std::min(s.height(), s.width())) {
    throw ConfigError("kernel_size must be odd, positive and no larger than the image");
  }
  AdmmState st = blank_state(s, config);
  apply_thread_limit_from_env();
  auto solver = std::make_shared<VariationalUSolver>(VariationalPrior(
      config.prior, s.height(), s.width(), kernel_size, config.seed));
  st.k = solver->kernel();
  st.usolver = std::move(solver);
  return st;
}

AdmmState init_state_nonblind(const Image& s, const Kernel& k,
                              const AdmmConfig& config) {
  if (k.size() > std::min(s.height(), s.width())) {
    throw ConfigError("kernel is larger than the image");
  }
  AdmmState st = blank_state(s, config);
  apply_thread_limit_from_env();
  st.usolver = std::make_shared<VariationalUSolver>(
      VariationalPrior(config.prior, s.height(), s.width(), k, config.seed));
  st.k = k;
  return st;
}

AdmmState init_state_with(const Image& s, std::shared_ptr<USubproblemSolver> solver,
                          const AdmmConfig& config) {
  if (!solver) throw InvalidArgument("u-subproblem solver is null");
  AdmmState st = blank_state(s, config);
  st.k = solver->kernel();
  st.usolver = std::move(solver);
  return st;
}

IterationRecord step(AdmmState& st, const Image& s, const AdmmConfig& config,
                     const StepHooks& hooks) {
  if (!st.usolver) throw InvalidArgument("state has no u-subproblem solver");
  if (!st.u.same_shape(s) || !st.q.same_shape(s) || !st.g.same_shape(s) ||
      !st.g_dual.same_shape(s) || !st.h.same_shape(s) || !st.h_dual.same_shape(s)) {
    throw InvalidArgument("state fields do not match the observation");
  }
  const TgvSubproblemOptions opt = config.subproblem_options();
  const Boundary bd = config.boundary;
  auto note = [&](std::string_view name) {
    if (hooks.trace) hooks.trace(name);
  };
  const int n = st.iteration + 1;
  IterationRecord rec;
  rec.iteration = n;
  try {
    note("solve_g");
    st.g = solve_g(st.u, st.q, st.g_dual, opt);
    note("solve_h");
    st.h = solve_h(st.q, st.h_dual, opt);

    note("solve_u");
    AdmmCoupling c{&st.g, &st.q, &st.g_dual, config.phi1, bd};
    USubproblemSolver::Output out = st.usolver->solve(s, c, config.beta, config.inner_steps);
    st.u = std::move(out.u);
    st.k = std::move(out.k);
    rec.loss = out.loss;
    rec.objective = out.objective;

    note("solve_q");
    for (int sweep = 0; sweep < config.q_sweeps; ++sweep) {
      st.q = solve_q(st.u, st.g, st.g_dual, st.h, st.h_dual, st.q, opt);
    }

    note("update_multipliers");
    VectorField rg = grad(st.u, bd) - st.q;
    rg -= st.g;
    SymTensorField rh = sym_deriv(st.q, bd) - st.h;
    st.g_dual.add_scaled(rg, config.mu);
    st.h_dual.add_scaled(rh, config.mu);
    rec.residual_g = field_norm(rg);
    rec.residual_h = field_norm(rh);
  } catch (const Error& e) {
    std::ostringstream os;
    os << "ADMM iteration " << n << ": " << e.what();
    throw Error(e.kind(), os.str());
  }
  if (!std::isfinite(rec.residual_g) || !std::isfinite(rec.residual_h)) {
    std::ostringstream os;
    os << "ADMM iteration " << n << ": residuals are not finite";
    throw NumericalError(os.str());
  }
  rec.kernel_entropy = kernel_entropy(st.k);
  st.iteration = n;
  st.residual_g_history.push_back(rec.residual_g);
  st.residual_h_history.push_back(rec.residual_h);
  return rec;
}

double augmented_lagrangian(const AdmmState& st, const Image& s,
                            const AdmmConfig& config) {
  const Boundary bd = config.boundary;
  const Image r = convolve(st.u, st.k, bd) - s;
  VectorField eg = st.g - grad(st.u, bd) + st.q;
  eg -= st.g_dual;
  SymTensorField eh = st.h - sym_deriv(st.q, bd);
  eh -= st.h_dual;
  return 0.5 * config.beta * squared_norm(r) +
         config.weights.gamma1 * l1_norm(st.g) +
         config.weights.gamma0 * l1_norm(st.h) +
         0.5 * config.phi1 * (squared_norm(eg) - squared_norm(st.g_dual)) +
         0.5 * config.phi2 *
             (squared_frobenius_norm(eh) - squared_frobenius_norm(st.h_dual));
}

double kernel_entropy(const Kernel& k) {
  double e = 0.0;
  for (double v : k.data()) {
    if (v > 0.0) e -= v * std::log(v);
  }
  return e;
}

Image clip_unit(const Image& u) {
  Image out = u;
  for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

SolveResult run(AdmmState state, const Image& s, const AdmmConfig& config,
                const IterationCallback& on_iteration) {
  config.validate();
  Diagnostics diag;
  try {
    for (int it = 0; it < config.outer_iters; ++it) {
      IterationRecord rec = step(state, s, config);
      diag.records.push_back(rec);
      diag.optimiser_steps = state.usolver->steps();
      if (on_iteration) on_iteration(rec);
      if (config.early_stop_tol > 0.0) {
        const double sg = std::max(std::sqrt(squared_norm(grad(state.u, config.boundary))), 1e-12);
        const double sh = std::max(std::sqrt(squared_norm(state.q)), 1e-12);
        if (rec.residual_g / sg < config.early_stop_tol &&
            rec.residual_h / sh < config.early_stop_tol) {
          diag.early_stopped = true;
          break;
        }
      }
    }
  } catch (const Error& e) {
    diag.optimiser_steps = state.usolver ? state.usolver->steps() : 0;
    throw SolveFailure(e.kind(), e.what(), std::move(diag));
  }
  SolveResult res;
  res.u = clip_unit(state.u);
  res.k = state.k;
  res.diagnostics = std::move(diag);
  res.state = std::move(state);
  return res;
}

SolveResult solve_blind(const Image& s, int kernel_size, const AdmmConfig& config,
                        const IterationCallback& on_iteration) {
  return run(init_state(s, kernel_size, config), s, config, on_iteration);
}

SolveResult solve_nonblind(const Image& s, const Kernel& k_known,
                           const AdmmConfig& config,
                           const IterationCallback& on_iteration) {
  return run(init_state_nonblind(s, k_known, config), s, config, on_iteration);
}

}  // namespace tgvd
