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

#include <filesystem>
#include <fstream>

#include "tgvdeconv/admm.hpp"
#include "tgvdeconv/config.hpp"
#include "tgvdeconv/error.hpp"

using namespace tgvd;

TEST_CASE("configuration text sets every kind of value") {
  AdmmConfig c;
  load_config_text(c, R"(
# solver
[admm]
beta = 1e3
phi1 = 2.5   # trailing comment
outer_iters = 12
boundary = "replicate"
strict_paper_scaling = true
seed = 18446744073709551615
image_channels = 8, 16, 24
lr_kernel = 5e-4
)");
  CHECK(c.beta == 1e3);
  CHECK(c.phi1 == 2.5);
  CHECK(c.outer_iters == 12);
  CHECK(c.boundary == Boundary::replicate);
  CHECK(c.strict_paper_scaling);
  CHECK(c.seed == 18446744073709551615ull);
  CHECK(c.prior.image_arch.channels == std::array<int, 3>{8, 16, 24});
  CHECK(c.prior.lr_kernel == 5e-4);
}

TEST_CASE("bad keys and values are configuration errors with a location") {
  AdmmConfig c;
  CHECK_THROWS_AS(set_config_value(c, "nonsense", "1"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "beta", "abc"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "beta", "inf"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "outer_iters", "2.5"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "seed", "-1"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "boundary", "mirror"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "image_channels", "1,2"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "strict_paper_scaling", "maybe"), ConfigError);
  try {
    load_config_text(c, "beta = 1\nmu\n", "cfg");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cfg:2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_config_file(c, "/nonexistent/tgvd.cfg"), IoError);
}

TEST_CASE("dumped configuration reloads to the same values") {
  AdmmConfig a;
  a.beta = 1.0 / 3.0;
  a.phi2 = 7.25;
  a.seed = 42;
  a.prior.lr_image = 3e-3;
  a.boundary = Boundary::replicate;
  const std::string text = dump_config(a);
  AdmmConfig b;
  load_config_text(b, text);
  CHECK(dump_config(b) == text);
  CHECK(b.beta == a.beta);
  CHECK(config_keys().size() > 20);
}

TEST_CASE("configuration validation guards the solver") {
  AdmmConfig c;
  c.validate();
  c.mu = 0.0;
  c.validate();  // frozen multipliers are allowed
  c.mu = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = AdmmConfig{};
  c.inner_steps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = AdmmConfig{};
  c.weights.gamma0 = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
