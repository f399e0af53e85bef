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

// Image interchange. PNG and PGM are 8-bit grayscale (16-bit and colour
// inputs are accepted and reduced to luminance); the ".f64" sidecar is a
// lossless planar dump:
//   "TGVDF64\0", u32 height, u32 width, u32 channels, then little-endian
//   doubles, channel-major, row-major.

#include <string>

#include "tgvdeconv/field.hpp"

namespace tgvd {

Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& img);
Image read_pgm(const std::string& path);
void write_pgm(const std::string& path, const Image& img);
Image read_f64(const std::string& path);
void write_f64(const std::string& path, const Image& img);

// Dispatch on the file extension (.png, .pgm, .f64).
Image read_image(const std::string& path);
void write_image(const std::string& path, const Image& img);

// Quantises [0, 1] values to 8 bits: round(clamp(v) * 255).
unsigned char quantize8(double v) noexcept;

// Kernel as a whitespace-separated K x K matrix of full-precision decimals.
Kernel read_kernel_text(const std::string& path);
void write_kernel_text(const std::string& path, const Kernel& k);
// Kernel as an image scaled so its largest entry maps to white.
void write_kernel_png(const std::string& path, const Kernel& k);
// Reads .txt matrices or renormalised images.
Kernel read_kernel(const std::string& path);

}  // namespace tgvd
