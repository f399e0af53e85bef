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

// Variational half of the u-subproblem. The two generators output Gaussian
// distributions Q(u) and Q(k); their parameters are fitted by minimising the
// negative variational lower bound plus the ADMM coupling penalty.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "tgvdeconv/field.hpp"
#include "tgvdeconv/network.hpp"

namespace tgvd {

struct GaussianImageDist {
  Image mean;
  Image log_std;

  Image std() const;
};

// Gaussian over unconstrained kernel logits. Realised kernels are the
// softmax of a logit sample.
struct GaussianKernelDist {
  int size = 1;
  std::vector<double> mean_logits;
  std::vector<double> log_std;

  std::vector<double> std() const;
  Kernel projected_mean() const;
};

struct XiFields {
  Image xi_x;
  Image xi_y;
};

struct LatentInputs {
  nn::Tensor z_u;
  std::vector<double> z_k;  // empty when the kernel is fixed
  std::uint64_t seed = 0;
};

// Softmax over logits onto the kernel simplex.
Kernel softmax_kernel(int size, std::span<const double> logits);

// mean + std * noise
Image sample_reparameterized(const GaussianImageDist& dist, const Image& noise);
// Logit sample mean + std * noise, before projection.
std::vector<double> sample_logits(const GaussianKernelDist& dist,
                                  std::span<const double> noise);
// softmax(sample_logits(dist, noise))
Kernel sample_reparameterized(const GaussianKernelDist& dist,
                              std::span<const double> noise);

// With rho(t) = |t|^p: xi = p * max(|F u|, epsilon)^(p - 2), F the forward
// differences along x (xi_x) and y (xi_y).
XiFields update_xi(const Image& u_mean, double rho_exponent, double epsilon,
                   Boundary boundary = Boundary::circular);

// Independent standard-normal draws shared by the loss and its gradient.
struct MonteCarloNoise {
  std::vector<Image> image;
  std::vector<std::vector<double>> kernel;  // empty for a fixed kernel

  static MonteCarloNoise draw(int height, int width, int kernel_entries,
                              int samples, std::mt19937_64& rng);
  int samples() const noexcept { return static_cast<int>(image.size()); }
};

enum LossTerm : unsigned {
  kKernelPrior = 1u << 0,
  kImageEntropy = 1u << 1,
  kGradientPrior = 1u << 2,
  kFidelity = 1u << 3,
  kPenalty = 1u << 4,
  kAllTerms = 0x1fu,
};

// Components of the loss. kernel_prior, image_entropy, gradient_prior and
// fidelity make up the negative lower bound; penalty is the ADMM coupling.
struct LossTerms {
  double kernel_prior = 0.0;
  double image_entropy = 0.0;
  double gradient_prior = 0.0;
  double fidelity = 0.0;
  double penalty = 0.0;

  double negative_elbo() const noexcept {
    return kernel_prior + image_entropy + gradient_prior + fidelity;
  }
  double total() const noexcept { return negative_elbo() + penalty; }
};

// Gradients of the selected loss terms with respect to the distribution
// parameters.
struct DistGradients {
  Image d_mean;
  Image d_log_std;
  std::vector<double> d_logits;
  std::vector<double> d_kernel_log_std;
};

struct LossEvaluation {
  LossTerms terms;
  DistGradients grad;
  std::vector<Image> image_samples;
};

// The kernel entering the fidelity term: either a fitted distribution or a
// known kernel (non-blind mode). Exactly one must be set.
struct KernelModel {
  const GaussianKernelDist* dist = nullptr;
  const Kernel* fixed = nullptr;
};

struct ElboOptions {
  double beta = 1e4;
  Boundary boundary = Boundary::circular;
};

// Negative lower bound, -L:
//   kernel_prior   = -1/2 sum_ij (2 ln S(k) - E(k)^2 - S(k)^2)
//   image_entropy  = -sum ln S(u)
//   gradient_prior = 1/4 sum xi_x E((Fx u)^2) + 1/4 sum xi_y E((Fy u)^2),
//                    E((F u)^2) = (F E(u))^2 + S^2 at both stencil pixels
//   fidelity       = beta/2 * mean over samples of ||k_s (x) u_s - s||^2
// Gradients are accumulated only for terms selected in gradient_terms.
LossEvaluation elbo_loss(const GaussianImageDist& img, const KernelModel& kernel,
                         const XiFields& xi, const Image& s,
                         const ElboOptions& opt, const MonteCarloNoise& noise,
                         unsigned gradient_terms = kAllTerms);

// Draws noise from rng and evaluates elbo_loss.
LossEvaluation elbo_loss(const GaussianImageDist& img, const KernelModel& kernel,
                         const XiFields& xi, const Image& s,
                         const ElboOptions& opt, int mc_samples,
                         std::mt19937_64& rng);

// Fields of the ADMM iterate the u-subproblem couples to.
struct AdmmCoupling {
  const VectorField* g = nullptr;
  const VectorField* q = nullptr;
  const VectorField* g_dual = nullptr;
  double phi1 = 1.0;
  Boundary boundary = Boundary::circular;
};

// Adds phi1/2 * mean over samples of ||g - (D u_s - q) - g_dual||^2 to an
// elbo_loss evaluation, including its gradient through the image samples.
LossEvaluation u_subproblem_loss(LossEvaluation elbo,
                                 const GaussianImageDist& img,
                                 const MonteCarloNoise& noise,
                                 const AdmmCoupling& coupling,
                                 unsigned gradient_terms = kAllTerms);

struct PriorConfig {
  nn::ImageGeneratorSpec image_arch;
  nn::KernelGeneratorSpec kernel_arch;  // kernel_size is set by the solver
  double lr_image = 1e-2;
  double lr_kernel = 1e-4;
  double rho_exponent = 1.0;
  double xi_epsilon = 1e-3;
  int mc_samples = 1;

  void validate() const;
};

struct USubproblemResult {
  Image u_mean;
  Kernel k_mean;
  std::vector<double> losses;  // total loss before each inner step
  LossTerms last_terms;
};

// Owns both generators, their parameters, optimiser state and latent inputs
// for one solve.
class VariationalPrior {
 public:
  // Blind mode: fits an image and a kernel_size x kernel_size kernel.
  VariationalPrior(const PriorConfig& config, int height, int width,
                   int kernel_size, std::uint64_t seed);
  // Non-blind mode: the kernel is known.
  VariationalPrior(const PriorConfig& config, int height, int width,
                   Kernel fixed_kernel, std::uint64_t seed);

  bool blind() const noexcept { return !fixed_kernel_.has_value(); }
  const PriorConfig& config() const noexcept { return config_; }
  const LatentInputs& latents() const noexcept { return latents_; }
  const nn::ImageGenerator& image_generator() const noexcept { return image_gen_; }
  const nn::KernelGenerator& kernel_generator() const;

  nn::GeneratorParams& image_params() noexcept { return image_params_; }
  const nn::GeneratorParams& image_params() const noexcept { return image_params_; }
  nn::GeneratorParams& kernel_params();
  const nn::GeneratorParams& kernel_params() const;

  GaussianImageDist image_dist() const;
  std::optional<GaussianKernelDist> kernel_dist() const;
  Kernel kernel_mean() const;

  // Total optimiser steps taken so far.
  long steps() const noexcept { return steps_; }

  // Runs inner_steps optimiser steps on the u-subproblem loss. xi is refreshed
  // from the current image mean before every step. Throws NumericalError when
  // the loss is non-finite or exceeds 1e12.
  USubproblemResult solve(const Image& s, const AdmmCoupling& coupling,
                          double beta, int inner_steps);

  // Gradient of the u-subproblem loss with respect to all generator
  // parameters (image parameters first, then kernel parameters), for a given
  // noise draw and fixed xi.
  struct ParamGradient {
    LossTerms terms;
    std::vector<double> image;
    std::vector<double> kernel;
  };
  ParamGradient loss_gradient(const Image& s, const AdmmCoupling& coupling,
                              double beta, const XiFields& xi,
                              const MonteCarloNoise& noise,
                              unsigned gradient_terms = kAllTerms) const;
  LossTerms loss_terms(const Image& s, const AdmmCoupling& coupling, double beta,
                       const XiFields& xi, const MonteCarloNoise& noise) const;

  void load_params(const std::vector<nn::GeneratorParams>& sections);
  std::vector<nn::GeneratorParams> params_snapshot() const;

 private:
  void init_common(int height, int width, std::uint64_t seed);

  PriorConfig config_;
  nn::ImageGenerator image_gen_;
  std::optional<nn::KernelGenerator> kernel_gen_;
  std::optional<Kernel> fixed_kernel_;
  LatentInputs latents_;
  nn::GeneratorParams image_params_;
  nn::GeneratorParams kernel_params_;
  nn::AdamOptimizer image_opt_;
  nn::AdamOptimizer kernel_opt_;
  std::mt19937_64 noise_rng_;
  long steps_ = 0;
};

}  // namespace tgvd
