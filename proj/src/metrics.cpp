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

#include "tgvdeconv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tgvdeconv/error.hpp"

namespace tgvd {

namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;

std::vector<double> gaussian_window() {
  std::vector<double> w(kWindow);
  const int r = kWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    w[i] = std::exp(-(i - r) * (i - r) / (2.0 * kWindowSigma * kWindowSigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable valid-region filtering.
Image filter_valid(const Image& a, const std::vector<double>& w) {
  const int n = static_cast<int>(w.size());
  const int h = a.height(), wd = a.width();
  Image rows(h - n + 1, wd);
  for (int x = 0; x < h - n + 1; ++x)
    for (int y = 0; y < wd; ++y) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += w[i] * a(x + i, y);
      rows(x, y) = acc;
    }
  Image out(h - n + 1, wd - n + 1);
  for (int x = 0; x < out.height(); ++x)
    for (int y = 0; y < out.width(); ++y) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += w[j] * rows(x, y + j);
      out(x, y) = acc;
    }
  return out;
}

std::vector<double> pad_centered(const Kernel& k, int size) {
  std::vector<double> out(static_cast<std::size_t>(size) * size, 0.0);
  const int off = (size - k.size()) / 2;
  for (int i = 0; i < k.size(); ++i)
    for (int j = 0; j < k.size(); ++j) out[(i + off) * size + j + off] = k(i, j);
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b, double peak) {
  if (!a.same_shape(b) || a.empty()) throw InvalidArgument("psnr: dimension mismatch");
  if (!(peak > 0.0)) throw InvalidArgument("psnr: peak must be positive");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Image& a, const Image& b, double peak) {
  if (!a.same_shape(b)) throw InvalidArgument("ssim: dimension mismatch");
  if (a.height() < kWindow || a.width() < kWindow) {
    throw InvalidArgument("ssim: images must be at least 11x11");
  }
  if (a == b) return 1.0;
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const std::vector<double> w = gaussian_window();
  Image aa = a, bb = b, ab = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const Image ma = filter_valid(a, w), mb = filter_valid(b, w);
  const Image saa = filter_valid(aa, w), sbb = filter_valid(bb, w),
              sab = filter_valid(ab, w);
  double acc = 0.0;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    const double va = saa[i] - ma[i] * ma[i];
    const double vb = sbb[i] - mb[i] * mb[i];
    const double cov = sab[i] - ma[i] * mb[i];
    acc += ((2.0 * ma[i] * mb[i] + c1) * (2.0 * cov + c2)) /
           ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
  }
  return acc / static_cast<double>(ma.size());
}

KernelError kernel_error_report(const Kernel& est, const Kernel& truth) {
  const int n = std::max(est.size(), truth.size());
  const std::vector<double> e = pad_centered(est, n);
  const std::vector<double> t = pad_centered(truth, n);
  const int range = n / 4;
  const double pixels = static_cast<double>(n) * n;
  KernelError rep;
  double best = std::numeric_limits<double>::infinity();
  for (int dx = -range; dx <= range; ++dx)
    for (int dy = -range; dy <= range; ++dy) {
      double se = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const int si = ((i - dx) % n + n) % n, sj = ((j - dy) % n + n) % n;
          const double d = e[si * n + sj] - t[i * n + j];
          se += d * d;
        }
      if (dx == 0 && dy == 0) rep.plain_mse = se / pixels;
      if (se < best || (se == best && dx == 0 && dy == 0)) {
        best = se;
        rep.shift_x = dx;
        rep.shift_y = dy;
      }
    }
  rep.aligned_sse = best;
  rep.aligned_mse = best / pixels;
  return rep;
}

double kernel_error(const Kernel& est, const Kernel& truth) {
  return kernel_error_report(est, truth).aligned_mse;
}

MetricReport evaluate(const Image& recovered, const Image& reference,
                      const Kernel* k_est, const Kernel* k_true) {
  MetricReport r;
  r.psnr = psnr(recovered, reference);
  r.ssim = ssim(recovered, reference);
  if (k_est && k_true) r.kernel = kernel_error_report(*k_est, *k_true);
  return r;
}

}  // namespace tgvd
