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
#include "tgvdeconv/metrics.hpp"
#include "tgvdeconv/synth.hpp"

using namespace tgvd;

TEST_CASE("PSNR of constant images offset by 0.1 is 20 dB") {
  CHECK(psnr(Image(8, 8, 0.3), Image(8, 8, 0.4)) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(Image(8, 8, 0.3), Image(8, 8, 0.4), 255.0) ==
        doctest::Approx(20.0 + 20.0 * std::log10(255.0)).epsilon(1e-12));
}

TEST_CASE("identical images hit the PSNR cap and unit SSIM") {
  const Image a = make_pattern(16, 16, 1);
  CHECK(psnr(a, a) == kPsnrCap);
  CHECK(ssim(a, a) == 1.0);
}

TEST_CASE("flat images differing by an offset score the luminance factor") {
  const double ma = 0.7, mb = 0.2, c1 = 1e-4;
  const double want = (2 * ma * mb + c1) / (ma * ma + mb * mb + c1);
  const double got = ssim(Image(16, 16, ma), Image(16, 16, mb));
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
  CHECK(got < 1.0);
}

TEST_CASE("SSIM drops as noise grows") {
  const Image a = make_pattern(32, 32, 2);
  oracle::Rng rng(3);
  const Image n1 = a + oracle::random_image(32, 32, rng, 0.02);
  const Image n2 = a + oracle::random_image(32, 32, rng, 0.1);
  CHECK(ssim(a, n1) == doctest::Approx(ssim(n1, a)).epsilon(1e-14));
  CHECK(ssim(a, n1) > ssim(a, n2));
  CHECK(ssim(a, n2) > 0.0);
}

TEST_CASE("metric inputs are validated") {
  CHECK_THROWS_AS(psnr(Image(4, 4), Image(4, 5)), InvalidArgument);
  CHECK_THROWS_AS(ssim(Image(10, 10), Image(10, 10)), InvalidArgument);
  CHECK_THROWS_AS(ssim(Image(12, 12), Image(12, 13)), InvalidArgument);
}

TEST_CASE("uniform versus delta 5x5 kernel error is 0.0384") {
  const double want = ((1 - 1.0 / 25) * (1 - 1.0 / 25) + 24.0 / (25.0 * 25.0)) / 25.0;
  CHECK(want == doctest::Approx(0.0384).epsilon(1e-12));
  const KernelError e = kernel_error_report(Kernel::uniform(5), Kernel::identity(5));
  CHECK(e.aligned_mse == doctest::Approx(want).epsilon(1e-12));
  CHECK(e.plain_mse == doctest::Approx(want).epsilon(1e-12));
  CHECK(e.aligned_sse == doctest::Approx(25.0 * want).epsilon(1e-12));
  CHECK(e.shift_x == 0);
  CHECK(e.shift_y == 0);
}

TEST_CASE("kernel error forgives a small shift but reports it") {
  std::vector<double> w(25, 0.0);
  w[2 * 5 + 3] = 1.0;  // delta one column right of centre
  const KernelError e = kernel_error_report(Kernel(5, w), Kernel::identity(5));
  CHECK(e.aligned_mse == 0.0);
  CHECK(e.plain_mse == doctest::Approx(2.0 / 25.0));
  CHECK(std::abs(e.shift_y) == 1);
  CHECK(e.shift_x == 0);
}

TEST_CASE("kernels of different sizes are compared after centred padding") {
  const KernelError e = kernel_error_report(Kernel::identity(3), Kernel::identity(5));
  CHECK(e.aligned_mse == 0.0);
  CHECK(kernel_error(Kernel::uniform(3), Kernel::uniform(3)) == 0.0);
}

TEST_CASE("evaluate bundles the metrics and omits kernels when absent") {
  const Image a = make_pattern(16, 16, 4);
  const Image b = a * 0.9;
  const MetricReport r = evaluate(b, a);
  CHECK(r.psnr == doctest::Approx(psnr(b, a)));
  CHECK(r.ssim == doctest::Approx(ssim(b, a)));
  CHECK_FALSE(r.kernel.has_value());
  const Kernel k = Kernel::uniform(5), t = Kernel::identity(5);
  CHECK(evaluate(b, a, &k, &t).kernel->aligned_mse == doctest::Approx(0.0384));
}

TEST_CASE("halving the error raises PSNR by 20 log10 2") {
  oracle::Rng rng(9);
  const Image a = make_pattern(16, 16, 5);
  const Image e = oracle::random_image(16, 16, rng, 0.05);
  const double p1 = psnr(a + e, a), p2 = psnr(a + 0.5 * e, a);
  CHECK(p2 - p1 == doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-10));
  CHECK(psnr(a + 2.0 * e, a) < p1);
}

TEST_CASE("SSIM is symmetric on random pairs") {
  oracle::Rng rng(10);
  for (int t = 0; t < 5; ++t) {
    const Image a = oracle::random_image(12, 14, rng), b = oracle::random_image(12, 14, rng);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-13));
    CHECK(ssim(a, b) <= 1.0);
  }
}
