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

#include "tgvdeconv/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace tgvd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string unquote(std::string v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::logic_error&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size() || !std::isfinite(d)) {
    throw ConfigError("'" + key + "': '" + v + "' is not a finite number");
  }
  return d;
}

long long to_integer(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &pos);
  } catch (const std::logic_error&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError("'" + key + "': '" + v + "' is not an integer");
  return n;
}

int to_int(const std::string& key, const std::string& v) {
  const long long n = to_integer(key, v);
  if (n < -2147483647LL || n > 2147483647LL) throw ConfigError("'" + key + "' is out of range");
  return static_cast<int>(n);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("'" + key + "': '" + v + "' is not a boolean");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Entry {
  std::function<void(AdmmConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const AdmmConfig&)> get;
};

#define TGVD_DOUBLE(name, field)                                                  \
  {name, {[](AdmmConfig& c, const std::string& k, const std::string& v) {         \
            c.field = to_double(k, v);                                             \
          },                                                                       \
          [](const AdmmConfig& c) { return fmt(c.field); }}}
#define TGVD_INT(name, field)                                                     \
  {name, {[](AdmmConfig& c, const std::string& k, const std::string& v) {         \
            c.field = to_int(k, v);                                                \
          },                                                                       \
          [](const AdmmConfig& c) { return std::to_string(c.field); }}}

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> r = {
      TGVD_DOUBLE("gamma0", weights.gamma0),
      TGVD_DOUBLE("gamma1", weights.gamma1),
      TGVD_DOUBLE("phi1", phi1),
      TGVD_DOUBLE("phi2", phi2),
      TGVD_DOUBLE("beta", beta),
      TGVD_DOUBLE("mu", mu),
      TGVD_INT("outer_iters", outer_iters),
      TGVD_INT("inner_steps", inner_steps),
      TGVD_INT("q_sweeps", q_sweeps),
      TGVD_DOUBLE("early_stop_tol", early_stop_tol),
      TGVD_DOUBLE("lr_image", prior.lr_image),
      TGVD_DOUBLE("lr_kernel", prior.lr_kernel),
      TGVD_DOUBLE("rho_exponent", prior.rho_exponent),
      TGVD_DOUBLE("xi_epsilon", prior.xi_epsilon),
      TGVD_INT("mc_samples", prior.mc_samples),
      TGVD_INT("image_input_channels", prior.image_arch.input_channels),
      TGVD_INT("image_skip_channels", prior.image_arch.skip_channels),
      TGVD_DOUBLE("image_initial_log_std", prior.image_arch.initial_log_std),
      TGVD_INT("kernel_latent_dim", prior.kernel_arch.latent_dim),
      TGVD_INT("kernel_hidden", prior.kernel_arch.hidden),
      TGVD_DOUBLE("kernel_initial_log_std", prior.kernel_arch.initial_log_std),
      TGVD_DOUBLE("kernel_logits_init_scale", prior.kernel_arch.logits_init_scale),
      TGVD_DOUBLE("image_latent_scale", prior.image_arch.latent_scale),
      {"boundary",
       {[](AdmmConfig& c, const std::string& k, const std::string& v) {
          try {
            c.boundary = parse_boundary(v);
          } catch (const Error&) {
            throw ConfigError("'" + k + "': unknown boundary '" + v + "'");
          }
        },
        [](const AdmmConfig& c) { return std::string(to_string(c.boundary)); }}},
      {"seed",
       {[](AdmmConfig& c, const std::string& k, const std::string& v) {
          std::size_t pos = 0;
          unsigned long long n = 0;
          try {
            if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
            n = std::stoull(v, &pos);
          } catch (const std::logic_error&) {
            pos = 0;
          }
          if (pos == 0 || pos != v.size()) throw ConfigError("'" + k + "': '" + v + "' is not a seed");
          c.seed = n;
        },
        [](const AdmmConfig& c) { return std::to_string(c.seed); }}},
      {"strict_paper_scaling",
       {[](AdmmConfig& c, const std::string& k, const std::string& v) {
          c.strict_paper_scaling = to_bool(k, v);
        },
        [](const AdmmConfig& c) { return std::string(c.strict_paper_scaling ? "true" : "false"); }}},
      {"image_channels",
       {[](AdmmConfig& c, const std::string& k, const std::string& v) {
          std::istringstream is(v);
          std::string tok;
          std::array<int, 3> ch{};
          int n = 0;
          while (std::getline(is, tok, ',')) {
            if (n == 3) throw ConfigError("'" + k + "' takes exactly three channel counts");
            ch[n++] = to_int(k, trim(tok));
          }
          if (n != 3) throw ConfigError("'" + k + "' takes exactly three channel counts");
          c.prior.image_arch.channels = ch;
        },
        [](const AdmmConfig& c) {
          const auto& ch = c.prior.image_arch.channels;
          return std::to_string(ch[0]) + "," + std::to_string(ch[1]) + "," +
                 std::to_string(ch[2]);
        }}},
  };
  return r;
}

#undef TGVD_DOUBLE
#undef TGVD_INT

}  // namespace

void set_config_value(AdmmConfig& config, const std::string& key,
                      const std::string& value) {
  const auto& r = registry();
  const auto it = r.find(key);
  if (it == r.end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second.set(config, key, unquote(trim(value)));
}

void load_config_text(AdmmConfig& config, const std::string& text,
                      const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      set_config_value(config, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void load_config_file(AdmmConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open configuration '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  load_config_text(config, ss.str(), path);
}

std::string dump_config(const AdmmConfig& config) {
  std::string out;
  for (const auto& [key, e] : registry()) out += key + " = " + e.get(config) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> k;
  for (const auto& [key, e] : registry()) k.push_back(key);
  return k;
}

}  // namespace tgvd
