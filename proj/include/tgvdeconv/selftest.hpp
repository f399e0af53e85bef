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

// Fast in-library property checks, run by `tgvdeconv selftest`.

#include <functional>
#include <string>
#include <vector>

namespace tgvd {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured worst case
  double tolerance = 0.0;  // pass when value <= tolerance
};

using SelftestCallback = std::function<void(const SelftestCheck&)>;

// Runs every check and reports each through the callback as it finishes.
std::vector<SelftestCheck> run_selftest(const SelftestCallback& on_check = {});

}  // namespace tgvd
