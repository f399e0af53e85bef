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

#include "tgvdeconv/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tgvdeconv/field.hpp"
#include "tgvdeconv/tgv.hpp"
#include "tgvdeconv/variational.hpp"

namespace tgvd {

namespace {

using Rng = std::mt19937_64;

Image random_image(int h, int w, Rng& rng) {
  std::normal_distribution<double> n01;
  Image img(h, w);
  for (double& v : img.data()) v = n01(rng);
  return img;
}

VectorField random_vector(int h, int w, Rng& rng) {
  return {random_image(h, w, rng), random_image(h, w, rng)};
}

SymTensorField random_tensor(int h, int w, Rng& rng) {
  return {random_image(h, w, rng), random_image(h, w, rng), random_image(h, w, rng)};
}

double adjoint_mismatch(Rng& rng) {
  double worst = 0.0;
  for (Boundary b : {Boundary::circular, Boundary::replicate}) {
    for (int t = 0; t < 10; ++t) {
      const Image u = random_image(8, 8, rng);
      const VectorField v = random_vector(8, 8, rng);
      worst = std::max(worst, std::abs(dot(grad(u, b), v) - dot(u, grad_adjoint(v, b))));
      const SymTensorField w = random_tensor(8, 8, rng);
      worst = std::max(worst, std::abs(dot(sym_deriv(v, b), w) -
                                       dot(v, sym_deriv_adjoint(w, b))));
    }
  }
  return worst;
}

// Largest objective decrease any random perturbation achieves over the
// shrinkage output; <= 0 means the output was never beaten.
double prox_defect(Rng& rng) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> phi_dist(0.1, 2.0);
  double worst = -1.0;
  for (int t = 0; t < 50; ++t) {
    const double phi = phi_dist(rng);
    const Vec2 a{n01(rng), n01(rng)};
    const Vec2 p = shrink_iso(a, phi);
    auto fv = [&](Vec2 x) {
      return phi * norm2(x) + 0.5 * ((x.a1 - a.a1) * (x.a1 - a.a1) + (x.a2 - a.a2) * (x.a2 - a.a2));
    };
    const Sym2 b{n01(rng), n01(rng), n01(rng)};
    const Sym2 hq = shrink_frob(b, phi);
    auto fs = [&](Sym2 x) {
      const Sym2 d{x.t11 - b.t11, x.t22 - b.t22, x.t12 - b.t12};
      const double fn = frobenius_norm(d);
      return phi * frobenius_norm(x) + 0.5 * fn * fn;
    };
    for (int k = 0; k < 20; ++k) {
      const double e = 1e-4;
      const Vec2 pp{p.a1 + e * n01(rng), p.a2 + e * n01(rng)};
      worst = std::max(worst, fv(p) - fv(pp));
      const Sym2 hh{hq.t11 + e * n01(rng), hq.t22 + e * n01(rng), hq.t12 + e * n01(rng)};
      worst = std::max(worst, fs(hq) - fs(hh));
    }
  }
  return worst;
}

double subproblem_defect(Rng& rng) {
  TgvSubproblemOptions opt;
  const Image u = random_image(8, 8, rng);
  const VectorField q = random_vector(8, 8, rng), gd = random_vector(8, 8, rng);
  SymTensorField hd = random_tensor(8, 8, rng);
  const VectorField g = solve_g(u, q, gd, opt);
  const SymTensorField h = solve_h(q, hd, opt);
  const double fg = g_objective(g, u, q, gd, opt);
  const double fh = h_objective(h, q, hd, opt);
  double worst = -1.0;
  std::normal_distribution<double> n01;
  for (int k = 0; k < 40; ++k) {
    VectorField gp = g;
    for (double& v : gp.c1.data()) v += 1e-3 * n01(rng);
    for (double& v : gp.c2.data()) v += 1e-3 * n01(rng);
    worst = std::max(worst, fg - g_objective(gp, u, q, gd, opt));
    SymTensorField hp = h;
    for (Image* p : {&hp.t11, &hp.t22, &hp.t12})
      for (double& v : p->data()) v += 1e-3 * n01(rng);
    worst = std::max(worst, fh - h_objective(hp, q, hd, opt));
  }
  return worst;
}

double tgv_affine(Rng&) {
  Image u(12, 10);
  for (int x = 0; x < 12; ++x)
    for (int y = 0; y < 10; ++y) u(x, y) = 0.3 * x - 0.7 * y + 2.0;
  TgvValueOptions o;
  o.boundary = Boundary::replicate;
  return tgv_value(u, TgvWeights{}, o);
}

double mc_sanity(Rng& rng) {
  GaussianImageDist d{Image(4, 4, 0.3), Image(4, 4, std::log(0.2))};
  const int n = 20000;
  Image sum(4, 4), sq(4, 4);
  std::normal_distribution<double> n01;
  for (int s = 0; s < n; ++s) {
    Image e(4, 4);
    for (double& v : e.data()) v = n01(rng);
    const Image x = sample_reparameterized(d, e);
    for (std::size_t i = 0; i < x.size(); ++i) {
      sum[i] += x[i];
      sq[i] += x[i] * x[i];
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    const double m = sum[i] / n;
    const double sd = std::sqrt(std::max(sq[i] / n - m * m, 0.0));
    // mean error in units of its standard error; std error relative
    worst = std::max(worst, std::abs(m - 0.3) / (0.2 / std::sqrt(n)) / 3.0);
    worst = std::max(worst, std::abs(sd - 0.2) / 0.2 / 0.05);
  }
  return worst;
}

double elbo_gradient(Rng& rng) {
  const int h = 8;
  PriorConfig pc;
  pc.image_arch.channels = {4, 4, 4};
  pc.kernel_arch.hidden = 8;
  pc.kernel_arch.latent_dim = 4;
  VariationalPrior vp(pc, h, h, 3, 11);
  Image s(h, h);
  std::uniform_real_distribution<double> U(0.2, 0.8);
  for (double& v : s.data()) v = U(rng);
  VectorField g = random_vector(h, h, rng), q = random_vector(h, h, rng);
  VectorField gd = random_vector(h, h, rng);
  const AdmmCoupling c{&g, &q, &gd, 1.0, Boundary::circular};
  const XiFields xi = update_xi(vp.image_dist().mean, 1.0, 1e-3, Boundary::circular);
  const MonteCarloNoise noise = MonteCarloNoise::draw(h, h, 9, 1, rng);
  const double beta = 10.0;
  const auto pg = vp.loss_gradient(s, c, beta, xi, noise);
  auto f = [&] { return vp.loss_terms(s, c, beta, xi, noise).total(); };
  double worst = 0.0;
  auto probe = [&](std::vector<double>& p, const std::vector<double>& gr) {
    double gmax = 0.0;
    for (double v : gr) gmax = std::max(gmax, std::abs(v));
    for (std::size_t i = 0; i < p.size(); i += std::max<std::size_t>(1, p.size() / 40)) {
      const double o = p[i], e = 1e-6;
      p[i] = o + e;
      const double fp = f();
      p[i] = o - e;
      const double fm = f();
      p[i] = o;
      const double fd = (fp - fm) / (2 * e);
      worst = std::max(worst, std::abs(fd - gr[i]) /
                                  std::max({std::abs(fd), std::abs(gr[i]), 1e-4 * gmax}));
    }
  };
  probe(vp.image_params().values, pg.image);
  probe(vp.kernel_params().values, pg.kernel);
  return worst;
}

}  // namespace

std::vector<SelftestCheck> run_selftest(const SelftestCallback& on_check) {
  struct Item {
    const char* name;
    double (*fn)(Rng&);
    double tol;
  };
  const Item items[] = {
      {"operator adjoints", adjoint_mismatch, 1e-10},
      {"shrinkage optimality", prox_defect, 1e-12},
      {"g/h subproblem optimality", subproblem_defect, 1e-12},
      {"tgv of affine image", tgv_affine, 1e-8},
      {"reparameterised moments", mc_sanity, 1.0},
      {"loss gradient vs finite differences", elbo_gradient, 1e-4},
  };
  std::vector<SelftestCheck> out;
  Rng rng(20240611);
  for (const Item& it : items) {
    SelftestCheck c{it.name, false, 0.0, it.tol};
    try {
      c.value = it.fn(rng);
      c.passed = c.value <= c.tolerance;
    } catch (const std::exception&) {
      c.value = std::nan("");
    }
    if (on_check) on_check(c);
    out.push_back(c);
  }
  return out;
}

}  // namespace tgvd
