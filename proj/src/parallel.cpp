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

#include "tgvdeconv/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>
#include <mutex>

namespace tgvd {

namespace {
std::atomic<int> g_limit{0};
std::once_flag g_env_once;
}  // namespace

void set_thread_limit(int n) {
  g_limit = n > 0 ? n : 0;
  omp_set_num_threads(n > 0 ? n : omp_get_num_procs());
}

int thread_limit() {
  return g_limit > 0 ? g_limit.load() : omp_get_max_threads();
}

void apply_thread_limit_from_env() {
  std::call_once(g_env_once, [] {
    if (g_limit > 0) return;
    if (const char* v = std::getenv("TGVDECONV_THREADS")) {
      const int n = std::atoi(v);
      if (n > 0) set_thread_limit(n);
    }
  });
}

}  // namespace tgvd
