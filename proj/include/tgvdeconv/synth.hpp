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

#include <cstdint>
#include <string>

#include "tgvdeconv/field.hpp"

namespace tgvd {

// Sampled isotropic Gaussian, normalised to unit sum.
Kernel gaussian_kernel(int size, double sigma);
// Anti-aliased line of the given length through the centre; angle in degrees
// measured from the column axis towards the row axis.
Kernel motion_kernel(int size, double length, double angle_deg);

// "gaussian:K:sigma", "motion:K:length:angle" or "file:path".
// Malformed specs throw InvalidArgument.
Kernel parse_kernel_spec(const std::string& spec);

// s = k (x) u + n, n ~ N(0, noise_sigma^2) drawn from seed.
Image synthesize(const Image& clean, const Kernel& k, double noise_sigma,
                 std::uint64_t seed, Boundary boundary = Boundary::circular);

// Deterministic piecewise-smooth test scene in [0.1, 0.9]: a shaded
// background, rectangles, discs and a smooth ramp.
Image make_pattern(int height, int width, std::uint64_t seed);

}  // namespace tgvd
