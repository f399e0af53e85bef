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

#include <optional>

#include "tgvdeconv/field.hpp"

namespace tgvd {

inline constexpr double kPsnrCap = 99.0;

// 10 log10(peak^2 / MSE), capped at kPsnrCap.
double psnr(const Image& a, const Image& b, double peak = 1.0);

// Mean SSIM over the valid region of an 11x11 Gaussian window (sigma 1.5).
double ssim(const Image& a, const Image& b, double peak = 1.0);

struct KernelError {
  double aligned_mse = 0.0;  // min over circular shifts within +-floor(K/4)
  double plain_mse = 0.0;    // no shift
  double aligned_sse = 0.0;  // aligned_mse * K * K
  int shift_x = 0;
  int shift_y = 0;
};

// The smaller kernel is zero-padded, centred, to the larger size.
KernelError kernel_error_report(const Kernel& est, const Kernel& truth);
double kernel_error(const Kernel& est, const Kernel& truth);

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<KernelError> kernel;
};

MetricReport evaluate(const Image& recovered, const Image& reference,
                      const Kernel* k_est = nullptr, const Kernel* k_true = nullptr);

}  // namespace tgvd
