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

#include "oracles.hpp"
#include "tgvdeconv/error.hpp"
#include "tgvdeconv/synth.hpp"

using namespace tgvd;

namespace {

double kernel_sum(const Kernel& k) {
  double s = 0.0;
  for (double v : k.data()) s += v;
  return s;
}

}  // namespace

TEST_CASE("kernel specs parse into unit-sum kernels") {
  const Kernel g = parse_kernel_spec("gaussian:5:1.0");
  CHECK(g.size() == 5);
  CHECK(std::abs(kernel_sum(g) - 1.0) < 1e-9);
  CHECK(g(2, 2) > g(2, 3));
  CHECK(g(1, 2) == doctest::Approx(g(2, 1)));
  CHECK(g(2, 3) / g(2, 2) == doctest::Approx(std::exp(-0.5)));

  const Kernel m = parse_kernel_spec("motion:7:5:0");
  CHECK(m.size() == 7);
  CHECK(std::abs(kernel_sum(m) - 1.0) < 1e-9);
  // Horizontal blur: all mass on the centre row.
  for (int i = 0; i < 7; ++i)
    if (i != 3)
      for (int j = 0; j < 7; ++j) CHECK(m(i, j) == 0.0);
  const Kernel v = parse_kernel_spec("motion:7:5:90");
  CHECK(v(3, 1) == doctest::Approx(m(1, 3)).epsilon(1e-9));
}

TEST_CASE("malformed kernel specs are invalid arguments") {
  for (const char* spec : {"gaussian", "gaussian:4:1", "gaussian:5:-1", "gaussian:5:x",
                           "motion:5:3", "box:5", "gaussian:5:1:2", ""}) {
    CAPTURE(spec);
    CHECK_THROWS_AS(parse_kernel_spec(spec), InvalidArgument);
  }
}

TEST_CASE("noiseless identity synthesis returns the input bit-exactly") {
  const Image u = make_pattern(16, 16, 3);
  CHECK(synthesize(u, Kernel::identity(1), 0.0, 9) == u);
  CHECK(synthesize(u, Kernel::identity(5), 0.0, 9, Boundary::replicate) == u);
}

TEST_CASE("synthesis is deterministic under its seed") {
  const Image u = make_pattern(16, 16, 3);
  const Kernel k = gaussian_kernel(5, 1.0);
  CHECK(synthesize(u, k, 0.01, 4) == synthesize(u, k, 0.01, 4));
  CHECK_FALSE(synthesize(u, k, 0.01, 4) == synthesize(u, k, 0.01, 5));
  const Image n = synthesize(u, Kernel::identity(1), 0.05, 6) - u;
  double var = 0.0;
  for (double v : n.data()) var += v * v;
  CHECK(std::sqrt(var / n.size()) == doctest::Approx(0.05).epsilon(0.15));
  CHECK_THROWS_AS(synthesize(u, k, -1.0, 1), InvalidArgument);
}

TEST_CASE("the test pattern is deterministic and within range") {
  const Image a = make_pattern(64, 64, 7);
  CHECK(a == make_pattern(64, 64, 7));
  CHECK_FALSE(a == make_pattern(64, 64, 8));
  double lo = 1.0, hi = 0.0;
  for (double v : a.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= 0.1);
  CHECK(hi <= 0.9);
  CHECK(hi - lo > 0.4);
}
