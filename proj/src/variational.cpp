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

#include "tgvdeconv/variational.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "tgvdeconv/error.hpp"

namespace tgvd {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream identifiers for the per-solve seeds.
enum SeedStream : std::uint64_t {
  kImageParams = 1,
  kKernelParams = 2,
  kImageLatent = 3,
  kKernelLatent = 4,
  kSampling = 5,
};

std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) {
  return splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL));
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

// Variance of the forward difference at each pixel under independent pixels.
Image diff_variance(const Image& var, Axis axis, Boundary b) {
  const int h = var.height(), w = var.width();
  Image out(h, w);
  for (int x = 0; x < h; ++x) {
    for (int y = 0; y < w; ++y) {
      const DiffStencil s = axis == Axis::x ? diff_stencil(x, h, b)
                                            : diff_stencil(y, w, b);
      if (s.plus == s.minus) continue;
      out(x, y) = axis == Axis::x ? var(s.plus, y) + var(s.minus, y)
                                  : var(x, s.plus) + var(x, s.minus);
    }
  }
  return out;
}

// Adjoint of diff_variance in var: scatters weights onto both stencil pixels.
Image diff_variance_adjoint(const Image& wgt, Axis axis, Boundary b) {
  const int h = wgt.height(), w = wgt.width();
  Image out(h, w);
  for (int x = 0; x < h; ++x) {
    for (int y = 0; y < w; ++y) {
      const DiffStencil s = axis == Axis::x ? diff_stencil(x, h, b)
                                            : diff_stencil(y, w, b);
      if (s.plus == s.minus) continue;
      if (axis == Axis::x) {
        out(s.plus, y) += wgt(x, y);
        out(s.minus, y) += wgt(x, y);
      } else {
        out(x, s.plus) += wgt(x, y);
        out(x, s.minus) += wgt(x, y);
      }
    }
  }
  return out;
}

void require_finite(double v, const char* term) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string("loss term '") + term + "' is not finite");
  }
}

}  // namespace

Image GaussianImageDist::std() const {
  Image s = log_std;
  for (double& v : s.data()) v = std::exp(v);
  return s;
}

std::vector<double> GaussianKernelDist::std() const {
  std::vector<double> s(log_std.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::exp(log_std[i]);
  return s;
}

Kernel GaussianKernelDist::projected_mean() const {
  return softmax_kernel(size, mean_logits);
}

Kernel softmax_kernel(int size, std::span<const double> logits) {
  if (logits.size() != static_cast<std::size_t>(size) * size) {
    throw InvalidArgument("softmax_kernel: logit count does not match size");
  }
  return Kernel::normalized(size, softmax(logits));
}

Image sample_reparameterized(const GaussianImageDist& dist, const Image& noise) {
  if (!noise.same_shape(dist.mean) || !dist.log_std.same_shape(dist.mean)) {
    throw InvalidArgument("sample_reparameterized: noise shape mismatch");
  }
  Image out = dist.mean;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += std::exp(dist.log_std[i]) * noise[i];
  }
  return out;
}

std::vector<double> sample_logits(const GaussianKernelDist& dist,
                                  std::span<const double> noise) {
  if (noise.size() != dist.mean_logits.size() ||
      dist.log_std.size() != dist.mean_logits.size()) {
    throw InvalidArgument("sample_reparameterized: kernel noise size mismatch");
  }
  std::vector<double> l(noise.size());
  for (std::size_t i = 0; i < l.size(); ++i) {
    l[i] = dist.mean_logits[i] + std::exp(dist.log_std[i]) * noise[i];
  }
  return l;
}

Kernel sample_reparameterized(const GaussianKernelDist& dist,
                              std::span<const double> noise) {
  return softmax_kernel(dist.size, sample_logits(dist, noise));
}

XiFields update_xi(const Image& u_mean, double rho_exponent, double epsilon,
                   Boundary boundary) {
  if (!(epsilon > 0.0)) throw InvalidArgument("update_xi: epsilon must be > 0");
  if (!(rho_exponent > 0.0 && rho_exponent <= 1.0)) {
    throw InvalidArgument("update_xi: rho exponent must lie in (0, 1]");
  }
  XiFields xi{forward_diff(u_mean, Axis::x, boundary),
              forward_diff(u_mean, Axis::y, boundary)};
  for (Image* f : {&xi.xi_x, &xi.xi_y}) {
    for (double& v : f->data()) {
      v = rho_exponent * std::pow(std::max(std::abs(v), epsilon), rho_exponent - 2.0);
    }
  }
  return xi;
}

MonteCarloNoise MonteCarloNoise::draw(int height, int width, int kernel_entries,
                                      int samples, std::mt19937_64& rng) {
  if (samples < 1) throw InvalidArgument("mc_samples must be >= 1");
  std::normal_distribution<double> n01(0.0, 1.0);
  MonteCarloNoise noise;
  for (int s = 0; s < samples; ++s) {
    Image e(height, width);
    for (double& v : e.data()) v = n01(rng);
    noise.image.push_back(std::move(e));
    if (kernel_entries > 0) {
      std::vector<double> k(kernel_entries);
      for (double& v : k) v = n01(rng);
      noise.kernel.push_back(std::move(k));
    }
  }
  return noise;
}

LossEvaluation elbo_loss(const GaussianImageDist& img, const KernelModel& kernel,
                         const XiFields& xi, const Image& s,
                         const ElboOptions& opt, const MonteCarloNoise& noise,
                         unsigned gradient_terms) {
  if ((kernel.dist == nullptr) == (kernel.fixed == nullptr)) {
    throw InvalidArgument("elbo_loss: exactly one kernel source must be given");
  }
  if (!img.mean.same_shape(s) || !img.log_std.same_shape(s) ||
      !xi.xi_x.same_shape(s) || !xi.xi_y.same_shape(s)) {
    throw InvalidArgument("elbo_loss: dimension mismatch");
  }
  if (noise.samples() < 1) throw InvalidArgument("elbo_loss: mc_samples >= 1");
  if (kernel.dist && static_cast<int>(noise.kernel.size()) != noise.samples()) {
    throw InvalidArgument("elbo_loss: missing kernel noise");
  }
  const Boundary bd = opt.boundary;
  const int h = s.height(), w = s.width();
  const Image sigma = img.std();

  LossEvaluation ev;
  ev.grad.d_mean = Image(h, w);
  ev.grad.d_log_std = Image(h, w);
  const std::size_t kk = kernel.dist ? kernel.dist->mean_logits.size() : 0;
  ev.grad.d_logits.assign(kk, 0.0);
  ev.grad.d_kernel_log_std.assign(kk, 0.0);

  // Kernel prior against a standard Gaussian over the logits.
  if (kernel.dist) {
    const auto& d = *kernel.dist;
    double acc = 0.0;
    for (std::size_t i = 0; i < kk; ++i) {
      const double ls = d.log_std[i], m = d.mean_logits[i];
      const double var = std::exp(2.0 * ls);
      acc += 2.0 * ls - m * m - var;
      if (gradient_terms & kKernelPrior) {
        ev.grad.d_logits[i] += m;
        ev.grad.d_kernel_log_std[i] += var - 1.0;
      }
    }
    ev.terms.kernel_prior = -0.5 * acc;
  }
  require_finite(ev.terms.kernel_prior, "kernel_prior");

  // Image entropy.
  {
    double acc = 0.0;
    for (std::size_t i = 0; i < img.log_std.size(); ++i) acc += img.log_std[i];
    ev.terms.image_entropy = -acc;
    if (gradient_terms & kImageEntropy) {
      for (double& v : ev.grad.d_log_std.data()) v -= 1.0;
    }
  }
  require_finite(ev.terms.image_entropy, "image_entropy");

  // Gradient prior with the expectation expanded under independent pixels.
  {
    Image var = sigma;
    for (double& v : var.data()) v *= v;
    double acc = 0.0;
    const std::pair<Axis, const Image*> axes[] = {{Axis::x, &xi.xi_x},
                                                  {Axis::y, &xi.xi_y}};
    for (const auto& [axis, xif] : axes) {
      const Image dm = forward_diff(img.mean, axis, bd);
      const Image dv = diff_variance(var, axis, bd);
      for (std::size_t i = 0; i < dm.size(); ++i) {
        acc += (*xif)[i] * (dm[i] * dm[i] + dv[i]);
      }
      if (gradient_terms & kGradientPrior) {
        Image t = dm;
        for (std::size_t i = 0; i < t.size(); ++i) t[i] *= (*xif)[i];
        ev.grad.d_mean.add_scaled(forward_diff_adjoint(t, axis, bd), 0.5);
        const Image dvar = diff_variance_adjoint(*xif, axis, bd);
        for (std::size_t i = 0; i < dvar.size(); ++i) {
          ev.grad.d_log_std[i] += 0.25 * dvar[i] * 2.0 * var[i];
        }
      }
    }
    ev.terms.gradient_prior = 0.25 * acc;
  }
  require_finite(ev.terms.gradient_prior, "gradient_prior");

  // Monte Carlo fidelity.
  {
    const int n = noise.samples();
    const double wgt = opt.beta / n;
    double acc = 0.0;
    const std::vector<double> tau =
        kernel.dist ? kernel.dist->std() : std::vector<double>{};
    for (int smp = 0; smp < n; ++smp) {
      const Image& eps = noise.image[smp];
      Image us = sample_reparameterized(img, eps);
      Image kimg;
      std::vector<double> kprob;
      if (kernel.dist) {
        kprob = softmax(sample_logits(*kernel.dist, noise.kernel[smp]));
        kimg = Image(kernel.dist->size, kernel.dist->size, kprob);
      } else {
        kimg = kernel.fixed->as_image();
      }
      Image r = convolve(us, kimg, bd);
      r -= s;
      acc += squared_norm(r);
      if (gradient_terms & kFidelity) {
        const Image du = convolve_adjoint(r, kimg, bd);
        for (std::size_t i = 0; i < du.size(); ++i) {
          ev.grad.d_mean[i] += wgt * du[i];
          ev.grad.d_log_std[i] += wgt * du[i] * eps[i] * sigma[i];
        }
        if (kernel.dist) {
          const Image dk = convolve_weight_gradient(r, us, kernel.dist->size, bd);
          double inner = 0.0;
          for (std::size_t i = 0; i < kk; ++i) inner += dk[i] * kprob[i];
          for (std::size_t i = 0; i < kk; ++i) {
            const double dl = wgt * kprob[i] * (dk[i] - inner);
            ev.grad.d_logits[i] += dl;
            ev.grad.d_kernel_log_std[i] += dl * noise.kernel[smp][i] * tau[i];
          }
        }
      }
      ev.image_samples.push_back(std::move(us));
    }
    ev.terms.fidelity = 0.5 * opt.beta * acc / n;
  }
  require_finite(ev.terms.fidelity, "fidelity");
  return ev;
}

LossEvaluation elbo_loss(const GaussianImageDist& img, const KernelModel& kernel,
                         const XiFields& xi, const Image& s,
                         const ElboOptions& opt, int mc_samples,
                         std::mt19937_64& rng) {
  const int kk = kernel.dist ? static_cast<int>(kernel.dist->mean_logits.size()) : 0;
  const MonteCarloNoise noise =
      MonteCarloNoise::draw(s.height(), s.width(), kk, mc_samples, rng);
  return elbo_loss(img, kernel, xi, s, opt, noise);
}

LossEvaluation u_subproblem_loss(LossEvaluation elbo,
                                 const GaussianImageDist& img,
                                 const MonteCarloNoise& noise,
                                 const AdmmCoupling& c,
                                 unsigned gradient_terms) {
  if (!c.g || !c.q || !c.g_dual) {
    throw InvalidArgument("u_subproblem_loss: coupling fields missing");
  }
  if (!c.g->same_shape(img.mean) || !c.q->same_shape(img.mean) ||
      !c.g_dual->same_shape(img.mean)) {
    throw InvalidArgument("u_subproblem_loss: dimension mismatch");
  }
  if (elbo.image_samples.size() != noise.image.size()) {
    throw InvalidArgument("u_subproblem_loss: sample count mismatch");
  }
  const int n = static_cast<int>(elbo.image_samples.size());
  const Image sigma = img.std();
  double acc = 0.0;
  for (int smp = 0; smp < n; ++smp) {
    // e = g - (D u_s - q) - g_dual
    VectorField e = *c.g - grad(elbo.image_samples[smp], c.boundary);
    e += *c.q;
    e -= *c.g_dual;
    acc += squared_norm(e);
    if ((gradient_terms & kPenalty) && c.phi1 != 0.0) {
      const Image du = grad_adjoint(e, c.boundary);
      const double wgt = -c.phi1 / n;
      const Image& eps = noise.image[smp];
      for (std::size_t i = 0; i < du.size(); ++i) {
        elbo.grad.d_mean[i] += wgt * du[i];
        elbo.grad.d_log_std[i] += wgt * du[i] * eps[i] * sigma[i];
      }
    }
  }
  elbo.terms.penalty = 0.5 * c.phi1 * acc / n;
  require_finite(elbo.terms.penalty, "penalty");
  return elbo;
}

// ---------------------------------------------------------------------------
// VariationalPrior

void PriorConfig::validate() const {
  if (!(lr_image > 0.0) || !(lr_kernel > 0.0)) {
    throw ConfigError("learning rates must be positive");
  }
  if (!(rho_exponent > 0.0 && rho_exponent <= 1.0)) {
    throw ConfigError("rho exponent must lie in (0, 1]");
  }
  if (!(xi_epsilon > 0.0)) throw ConfigError("xi epsilon must be positive");
  if (mc_samples < 1) throw ConfigError("mc_samples must be >= 1");
}

VariationalPrior::VariationalPrior(const PriorConfig& config, int height,
                                   int width, int kernel_size,
                                   std::uint64_t seed)
    : config_(config), image_gen_(config.image_arch) {
  config_.validate();
  if (kernel_size < 1 || kernel_size % 2 == 0 ||
      kernel_size > std::min(height, width)) {
    throw ConfigError("kernel size must be odd, positive and fit the image");
  }
  config_.kernel_arch.kernel_size = kernel_size;
  kernel_gen_.emplace(config_.kernel_arch);
  init_common(height, width, seed);
}

VariationalPrior::VariationalPrior(const PriorConfig& config, int height,
                                   int width, Kernel fixed_kernel,
                                   std::uint64_t seed)
    : config_(config), image_gen_(config.image_arch),
      fixed_kernel_(std::move(fixed_kernel)) {
  config_.validate();
  if (fixed_kernel_->size() > std::min(height, width)) {
    throw ConfigError("kernel does not fit the image");
  }
  init_common(height, width, seed);
}

void VariationalPrior::init_common(int height, int width, std::uint64_t seed) {
  latents_.seed = seed;
  latents_.z_u = image_gen_.make_latent(height, width, derive_seed(seed, kImageLatent));
  image_params_ = image_gen_.initialize(derive_seed(seed, kImageParams));
  image_opt_ = nn::AdamOptimizer(image_params_.values.size(), config_.lr_image);
  if (kernel_gen_) {
    latents_.z_k = kernel_gen_->make_latent(derive_seed(seed, kKernelLatent));
    kernel_params_ = kernel_gen_->initialize(derive_seed(seed, kKernelParams));
    kernel_opt_ = nn::AdamOptimizer(kernel_params_.values.size(), config_.lr_kernel);
  }
  noise_rng_.seed(derive_seed(seed, kSampling));
}

const nn::KernelGenerator& VariationalPrior::kernel_generator() const {
  if (!kernel_gen_) throw InvalidArgument("non-blind prior has no kernel generator");
  return *kernel_gen_;
}

nn::GeneratorParams& VariationalPrior::kernel_params() {
  if (!kernel_gen_) throw InvalidArgument("non-blind prior has no kernel generator");
  return kernel_params_;
}

const nn::GeneratorParams& VariationalPrior::kernel_params() const {
  if (!kernel_gen_) throw InvalidArgument("non-blind prior has no kernel generator");
  return kernel_params_;
}

GaussianImageDist VariationalPrior::image_dist() const {
  auto out = image_gen_.forward(image_params_, latents_.z_u);
  return {std::move(out.mean), std::move(out.log_std)};
}

std::optional<GaussianKernelDist> VariationalPrior::kernel_dist() const {
  if (!kernel_gen_) return std::nullopt;
  auto out = kernel_gen_->forward(kernel_params_, latents_.z_k);
  return GaussianKernelDist{kernel_gen_->spec().kernel_size, std::move(out.logits),
                            std::move(out.log_std)};
}

Kernel VariationalPrior::kernel_mean() const {
  if (fixed_kernel_) return *fixed_kernel_;
  return kernel_dist()->projected_mean();
}

VariationalPrior::ParamGradient VariationalPrior::loss_gradient(
    const Image& s, const AdmmCoupling& coupling, double beta,
    const XiFields& xi, const MonteCarloNoise& noise,
    unsigned gradient_terms) const {
  if (!s.same_shape(Image(latents_.z_u.height, latents_.z_u.width))) {
    throw InvalidArgument("observation does not match the generator size");
  }
  nn::ImageGenerator::Cache icache;
  auto iout = image_gen_.forward(image_params_, latents_.z_u, &icache);
  GaussianImageDist img{std::move(iout.mean), std::move(iout.log_std)};

  nn::KernelGenerator::Cache kcache;
  std::optional<GaussianKernelDist> kdist;
  if (kernel_gen_) {
    auto kout = kernel_gen_->forward(kernel_params_, latents_.z_k, &kcache);
    kdist = GaussianKernelDist{kernel_gen_->spec().kernel_size,
                               std::move(kout.logits), std::move(kout.log_std)};
  }
  KernelModel km;
  if (kdist) {
    km.dist = &*kdist;
  } else {
    km.fixed = &*fixed_kernel_;
  }
  ElboOptions eo{beta, coupling.boundary};
  LossEvaluation ev = elbo_loss(img, km, xi, s, eo, noise, gradient_terms);
  if (coupling.g) ev = u_subproblem_loss(std::move(ev), img, noise, coupling, gradient_terms);

  ParamGradient pg;
  pg.terms = ev.terms;
  pg.image.assign(image_params_.values.size(), 0.0);
  image_gen_.backward(image_params_, icache, ev.grad.d_mean, ev.grad.d_log_std,
                      pg.image);
  if (kernel_gen_) {
    pg.kernel.assign(kernel_params_.values.size(), 0.0);
    kernel_gen_->backward(kernel_params_, kcache, ev.grad.d_logits,
                          ev.grad.d_kernel_log_std, pg.kernel);
  }
  return pg;
}

LossTerms VariationalPrior::loss_terms(const Image& s, const AdmmCoupling& coupling,
                                       double beta, const XiFields& xi,
                                       const MonteCarloNoise& noise) const {
  const GaussianImageDist img = image_dist();
  const std::optional<GaussianKernelDist> kdist = kernel_dist();
  KernelModel km;
  if (kdist) {
    km.dist = &*kdist;
  } else {
    km.fixed = &*fixed_kernel_;
  }
  ElboOptions eo{beta, coupling.boundary};
  LossEvaluation ev = elbo_loss(img, km, xi, s, eo, noise, 0u);
  if (coupling.g) ev = u_subproblem_loss(std::move(ev), img, noise, coupling, 0u);
  return ev.terms;
}

USubproblemResult VariationalPrior::solve(const Image& s,
                                          const AdmmCoupling& coupling,
                                          double beta, int inner_steps) {
  if (inner_steps < 1) throw InvalidArgument("inner_steps must be >= 1");
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  USubproblemResult res;
  const int kk = kernel_gen_ ? kernel_gen_->spec().kernel_size *
                                   kernel_gen_->spec().kernel_size
                             : 0;
  for (int it = 0; it < inner_steps; ++it) {
    const GaussianImageDist current = image_dist();
    const XiFields xi = update_xi(current.mean, config_.rho_exponent,
                                  config_.xi_epsilon, coupling.boundary);
    const MonteCarloNoise noise = MonteCarloNoise::draw(
        s.height(), s.width(), kk, config_.mc_samples, noise_rng_);
    ParamGradient pg;
    try {
      pg = loss_gradient(s, coupling, beta, xi, noise);
    } catch (const NumericalError& e) {
      std::ostringstream os;
      os << e.what() << " at optimiser step " << steps_;
      throw NumericalError(os.str());
    }
    const double loss = pg.terms.total();
    if (!std::isfinite(loss) || loss > 1e12) {
      std::ostringstream os;
      os << "u-subproblem diverged at optimiser step " << steps_ << " (loss "
         << loss << "); recent losses:";
      const std::size_t from = res.losses.size() > 5 ? res.losses.size() - 5 : 0;
      for (std::size_t i = from; i < res.losses.size(); ++i) os << ' ' << res.losses[i];
      throw NumericalError(os.str());
    }
    res.losses.push_back(loss);
    res.last_terms = pg.terms;
    image_opt_.step(image_params_.values, pg.image);
    if (kernel_gen_) kernel_opt_.step(kernel_params_.values, pg.kernel);
    ++steps_;
  }
  res.u_mean = image_dist().mean;
  res.k_mean = kernel_mean();
  return res;
}

void VariationalPrior::load_params(const std::vector<nn::GeneratorParams>& sections) {
  for (const auto& p : sections) {
    if (p.arch == image_params_.arch) {
      image_params_.values = p.values;
    } else if (kernel_gen_ && p.arch == kernel_params_.arch) {
      kernel_params_.values = p.values;
    } else {
      throw ConfigError("checkpoint section '" + p.arch.kind() +
                        "' does not match this solver's architecture");
    }
  }
}

std::vector<nn::GeneratorParams> VariationalPrior::params_snapshot() const {
  std::vector<nn::GeneratorParams> out{image_params_};
  if (kernel_gen_) out.push_back(kernel_params_);
  return out;
}

}  // namespace tgvd
