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

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "tgvdeconv/error.hpp"
#include "tgvdeconv/network.hpp"

using namespace tgvd;
using namespace tgvd::nn;

namespace {

ImageGeneratorSpec small_image_spec() {
  ImageGeneratorSpec s;
  s.input_channels = 3;
  s.channels = {4, 5, 6};
  s.skip_channels = 2;
  return s;
}

KernelGeneratorSpec small_kernel_spec() {
  KernelGeneratorSpec s;
  s.kernel_size = 3;
  s.latent_dim = 6;
  s.hidden = 10;
  return s;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("zeroed output heads give mean 0.5 and unit deviation") {
  const ImageGenerator gen(small_image_spec());
  GeneratorParams p = gen.initialize(1);
  zero_output_heads(p);
  const auto out = gen.forward(p, gen.make_latent(8, 8, 2));
  for (double v : out.mean.data()) CHECK(v == 0.5);
  for (double v : out.log_std.data()) CHECK(v == 0.0);

  const KernelGenerator kg(small_kernel_spec());
  GeneratorParams kp = kg.initialize(1);
  zero_output_heads(kp);
  const auto ko = kg.forward(kp, kg.make_latent(3));
  for (double v : ko.logits) CHECK(v == 0.0);
  for (double v : ko.log_std) CHECK(v == 0.0);
}

TEST_CASE("generators are deterministic in seed and inputs") {
  const ImageGenerator gen(small_image_spec());
  const auto p1 = gen.initialize(7), p2 = gen.initialize(7), p3 = gen.initialize(8);
  CHECK(p1.values == p2.values);
  CHECK(p1.values != p3.values);
  const Tensor z = gen.make_latent(8, 8, 3);
  CHECK(z == gen.make_latent(8, 8, 3));
  const auto a = gen.forward(p1, z), b = gen.forward(p1, z);
  CHECK(a.mean == b.mean);
  CHECK(a.log_std == b.log_std);
  for (double v : z.data) {
    CHECK(v >= 0.0);
    CHECK(v < gen.spec().latent_scale);
  }

  const KernelGenerator kg(small_kernel_spec());
  const auto kp = kg.initialize(4);
  const auto zk = kg.make_latent(5);
  CHECK(kg.forward(kp, zk).logits == kg.forward(kp, zk).logits);
}

TEST_CASE("initial outputs follow the configured starting point") {
  ImageGeneratorSpec spec = small_image_spec();
  spec.initial_log_std = -2.5;
  const ImageGenerator gen(spec);
  const auto out = gen.forward(gen.initialize(3), gen.make_latent(8, 8, 4));
  for (double v : out.mean.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  for (double v : out.log_std.data()) CHECK(std::abs(v + 2.5) < 0.5);

  KernelGeneratorSpec ks = small_kernel_spec();
  ks.logits_init_scale = 0.0;
  const KernelGenerator kg(ks);
  const auto ko = kg.forward(kg.initialize(3), kg.make_latent(4));
  for (double v : ko.logits) CHECK(v == 0.0);
}

TEST_CASE("image generator backward matches finite-difference Jacobian columns") {
  const ImageGenerator gen(small_image_spec());
  GeneratorParams p = gen.initialize(21);
  const Tensor z = gen.make_latent(8, 8, 22);
  oracle::Rng rng(23);
  const Image wm = oracle::random_image(8, 8, rng), ws = oracle::random_image(8, 8, rng);
  ImageGenerator::Cache cache;
  gen.forward(p, z, &cache);
  std::vector<double> grad(p.values.size(), 0.0);
  gen.backward(p, cache, wm, ws, grad);
  auto f = [&] {
    const auto o = gen.forward(p, z);
    return dot(wm, o.mean) + dot(ws, o.log_std);
  };
  double gmax = 0.0;
  for (double g : grad) gmax = std::max(gmax, std::abs(g));
  double worst = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double o = p.values[i], h = 1e-5;
    p.values[i] = o + h;
    const double fp = f();
    p.values[i] = o - h;
    const double fm = f();
    p.values[i] = o;
    worst = std::max(worst, oracle::relative_error(grad[i], (fp - fm) / (2 * h), 1e-6 * gmax));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("kernel generator backward matches finite-difference Jacobian columns") {
  const KernelGenerator kg(small_kernel_spec());
  GeneratorParams p = kg.initialize(31);
  const auto z = kg.make_latent(32);
  std::mt19937_64 rng(33);
  std::normal_distribution<double> n01;
  std::vector<double> wl(9), ws(9);
  for (double& v : wl) v = n01(rng);
  for (double& v : ws) v = n01(rng);
  KernelGenerator::Cache cache;
  kg.forward(p, z, &cache);
  std::vector<double> grad(p.values.size(), 0.0);
  kg.backward(p, cache, wl, ws, grad);
  auto f = [&] {
    const auto o = kg.forward(p, z);
    double s = 0.0;
    for (int i = 0; i < 9; ++i) s += wl[i] * o.logits[i] + ws[i] * o.log_std[i];
    return s;
  };
  double gmax = 0.0;
  for (double g : grad) gmax = std::max(gmax, std::abs(g));
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double o = p.values[i], h = 1e-5;
    p.values[i] = o + h;
    const double fp = f();
    p.values[i] = o - h;
    const double fm = f();
    p.values[i] = o;
    CHECK(oracle::relative_error(grad[i], (fp - fm) / (2 * h), 1e-6 * gmax) < 1e-4);
  }
}

TEST_CASE("shape mismatches are configuration errors") {
  const ImageGenerator gen(small_image_spec());
  GeneratorParams p = gen.initialize(1);
  CHECK_THROWS_AS(gen.forward(p, Tensor(2, 8, 8)), ConfigError);
  p.values.pop_back();
  CHECK_THROWS_AS(gen.forward(p, gen.make_latent(8, 8, 1)), ConfigError);
  const KernelGenerator kg(small_kernel_spec());
  const auto kp = kg.initialize(1);
  CHECK_THROWS_AS(kg.forward(kp, std::vector<double>(3)), ConfigError);
  CHECK_THROWS_AS(kg.forward(gen.initialize(1), kg.make_latent(1)), ConfigError);
}

TEST_CASE("architecture descriptors round-trip through text") {
  const ImageGenerator gen(small_image_spec());
  const auto& d = gen.descriptor();
  CHECK(ArchitectureDescriptor::parse(d.serialize()) == d);
  CHECK(d.parameter_count() == gen.initialize(0).values.size());
  const KernelGenerator kg(small_kernel_spec());
  CHECK(ArchitectureDescriptor::parse(kg.descriptor().serialize()) == kg.descriptor());
  CHECK_THROWS(ArchitectureDescriptor::parse("not a descriptor"));
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  const ImageGenerator gen(small_image_spec());
  const KernelGenerator kg(small_kernel_spec());
  const std::vector<GeneratorParams> sections{gen.initialize(5), kg.initialize(6)};
  const std::string path = temp_path("tgvd_test_ckpt.bin");
  save_checkpoint(path, sections);
  const auto back = load_checkpoint(path);
  REQUIRE(back.size() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(back[i].arch == sections[i].arch);
    CHECK(back[i].values == sections[i].values);
  }
  std::FILE* f = std::fopen(path.c_str(), "r+b");
  std::fputc('X', f);
  std::fclose(f);
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
}

TEST_CASE("Adam minimises a separable quadratic") {
  std::vector<double> x{3.0, -2.0, 0.5};
  AdamOptimizer opt(3, 0.05);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> g{2 * (x[0] - 1.0), 2 * (x[1] + 1.0), 2 * x[2]};
    opt.step(x, g);
  }
  CHECK(opt.steps() == 2000);
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(x[1] == doctest::Approx(-1.0).epsilon(1e-3));
  CHECK(std::abs(x[2]) < 1e-3);
}

TEST_CASE("first Adam step moves each coordinate by the learning rate") {
  std::vector<double> x{0.0, 0.0};
  AdamOptimizer opt(2, 0.01);
  opt.step(x, std::vector<double>{5.0, -0.001});
  CHECK(x[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(x[1] == doctest::Approx(0.01).epsilon(1e-4));
}
