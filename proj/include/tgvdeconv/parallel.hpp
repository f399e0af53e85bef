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

namespace tgvd {

// Caps the worker threads used by per-pixel and per-channel loops. Reads
// TGVDECONV_THREADS the first time any solver entry point runs unless a cap
// was set explicitly. n <= 0 restores the OpenMP default.
void set_thread_limit(int n);
int thread_limit();
void apply_thread_limit_from_env();

}  // namespace tgvd
