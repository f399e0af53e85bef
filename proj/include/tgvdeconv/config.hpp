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

// TOML-style "key = value" configuration. Section headers are accepted and
// ignored, '#' starts a comment, string values may be quoted.

#include <string>
#include <vector>

#include "tgvdeconv/admm.hpp"

namespace tgvd {

// Throws ConfigError on unknown keys or unparsable values.
void set_config_value(AdmmConfig& config, const std::string& key,
                      const std::string& value);
void load_config_text(AdmmConfig& config, const std::string& text,
                      const std::string& origin = "<string>");
// IoError when unreadable.
void load_config_file(AdmmConfig& config, const std::string& path);
// Every key with a round-trippable value, one per line.
std::string dump_config(const AdmmConfig& config);
std::vector<std::string> config_keys();

}  // namespace tgvd
