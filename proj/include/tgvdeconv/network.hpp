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

// Small generator networks with hand-derived reverse-mode gradients.
//
// Image generator: three-level encoder-decoder over a fixed noise tensor.
// Every hidden layer is convolution, per-channel normalisation, ELU; 3x3
// convolutions, average-pool down / nearest up, 1x1 skip projections, and
// two 1x1 heads producing a per-pixel mean (through a sigmoid) and a
// per-pixel log standard deviation.
//
// Kernel generator: one fully connected hidden layer over a fixed noise
// vector with two linear heads for the kernel logits and their log standard
// deviations.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tgvdeconv/field.hpp"

namespace tgvd::nn {

// channels x height x width, each channel a row-major plane.
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(height) * width;
  }
  double* plane(int c) noexcept { return data.data() + c * plane_size(); }
  const double* plane(int c) const noexcept {
    return data.data() + c * plane_size();
  }
  bool operator==(const Tensor&) const = default;
};

struct ParamBlock {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t count = 0;
  bool operator==(const ParamBlock&) const = default;
};

// Layer shapes of one generator. Serialises to a line-oriented text form
// used as the checkpoint header.
class ArchitectureDescriptor {
 public:
  ArchitectureDescriptor() = default;
  explicit ArchitectureDescriptor(std::string kind) : kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }
  const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }
  std::size_t parameter_count() const noexcept { return count_; }

  void set_attribute(const std::string& key, const std::string& value);
  const std::string& attribute(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& attributes() const noexcept {
    return attributes_;
  }

  const ParamBlock& add_block(const std::string& name, std::vector<int> shape);
  const ParamBlock& block(const std::string& name) const;

  std::string serialize() const;
  static ArchitectureDescriptor parse(const std::string& text);

  bool operator==(const ArchitectureDescriptor&) const = default;

 private:
  std::string kind_;
  std::vector<std::pair<std::string, std::string>> attributes_;
  std::vector<ParamBlock> blocks_;
  std::size_t count_ = 0;
};

struct GeneratorParams {
  ArchitectureDescriptor arch;
  std::vector<double> values;

  // Throws ConfigError when values do not match the descriptor.
  void validate() const;
  std::span<double> block(const std::string& name);
  std::span<const double> block(const std::string& name) const;
};

// Zeroes every parameter of the output heads (weights and biases).
void zero_output_heads(GeneratorParams& params);

// Normalised activations and per-channel inverse deviations of one layer.
struct NormState {
  Tensor xhat;
  std::vector<double> inv_std;
};

struct ImageGeneratorSpec {
  int input_channels = 8;
  std::array<int, 3> channels{16, 32, 64};
  int skip_channels = 4;
  // Latent noise is uniform in [0, latent_scale).
  double latent_scale = 0.1;
  // Initial bias of the log-std head.
  double initial_log_std = -3.0;
};

struct ImageGeneratorOutput {
  Image mean;     // sigmoid of the mean head, in (0, 1)
  Image log_std;  // std = exp(log_std)
};

class ImageGenerator {
 public:
  explicit ImageGenerator(ImageGeneratorSpec spec = {});

  const ImageGeneratorSpec& spec() const noexcept { return spec_; }
  const ArchitectureDescriptor& descriptor() const noexcept { return arch_; }

  GeneratorParams initialize(std::uint64_t seed) const;
  // Uniform noise in [0, latent_scale), input_channels x height x width.
  Tensor make_latent(int height, int width, std::uint64_t seed) const;

  // Intermediate activations kept for the backward pass.
  struct Cache {
    Tensor z, e1, p1, e2, p2, e3, s1, s2, cat2, d2, cat1, d1;
    NormState n_e1, n_e2, n_e3, n_s1, n_s2, n_d2, n_d1;
    Image mean;
  };

  ImageGeneratorOutput forward(const GeneratorParams& params, const Tensor& z,
                               Cache* cache = nullptr) const;
  // Accumulates d(loss)/d(params) into grad given d(loss)/d(mean) and
  // d(loss)/d(log_std).
  void backward(const GeneratorParams& params, const Cache& cache,
                const Image& d_mean, const Image& d_log_std,
                std::span<double> grad) const;

 private:
  void check(const GeneratorParams& params, const Tensor& z) const;

  ImageGeneratorSpec spec_;
  ArchitectureDescriptor arch_;
};

struct KernelGeneratorSpec {
  int kernel_size = 5;
  int latent_dim = 64;
  int hidden = 256;
  double initial_log_std = -3.0;
  // Multiplies the default initialisation range of the logit head; 0 starts
  // from the exactly uniform (centred) kernel.
  double logits_init_scale = 1.0;
};

struct KernelGeneratorOutput {
  std::vector<double> logits;   // K*K, pre-softmax means
  std::vector<double> log_std;  // K*K
};

class KernelGenerator {
 public:
  explicit KernelGenerator(KernelGeneratorSpec spec = {});

  const KernelGeneratorSpec& spec() const noexcept { return spec_; }
  const ArchitectureDescriptor& descriptor() const noexcept { return arch_; }

  GeneratorParams initialize(std::uint64_t seed) const;
  std::vector<double> make_latent(std::uint64_t seed) const;

  struct Cache {
    std::vector<double> z, hidden;
  };

  KernelGeneratorOutput forward(const GeneratorParams& params,
                                std::span<const double> z,
                                Cache* cache = nullptr) const;
  void backward(const GeneratorParams& params, const Cache& cache,
                std::span<const double> d_logits,
                std::span<const double> d_log_std,
                std::span<double> grad) const;

 private:
  void check(const GeneratorParams& params, std::size_t latent) const;

  KernelGeneratorSpec spec_;
  ArchitectureDescriptor arch_;
};

// Adam with bias correction. One instance per parameter vector.
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(std::size_t n, double learning_rate, double beta1 = 0.9,
                double beta2 = 0.999, double epsilon = 1e-8);

  void step(std::span<double> params, std::span<const double> grad);
  long steps() const noexcept { return t_; }
  double learning_rate() const noexcept { return lr_; }

 private:
  double lr_ = 1e-3, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::vector<double> m_, v_;
};

// Checkpoint file: "TGVDCKPT" magic, u32 version, u32 section count, then per
// section u32 descriptor length, descriptor text, u64 value count and the
// values as little-endian IEEE-754 doubles.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const std::string& path,
                     const std::vector<GeneratorParams>& sections);
std::vector<GeneratorParams> load_checkpoint(const std::string& path);

}  // namespace tgvd::nn
