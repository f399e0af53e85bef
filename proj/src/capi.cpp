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

#include "tgvdeconv/tgvdeconv.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "tgvdeconv/admm.hpp"
#include "tgvdeconv/config.hpp"
#include "tgvdeconv/error.hpp"
#include "tgvdeconv/imageio.hpp"
#include "tgvdeconv/metrics.hpp"
#include "tgvdeconv/network.hpp"
#include "tgvdeconv/parallel.hpp"
#include "tgvdeconv/selftest.hpp"
#include "tgvdeconv/synth.hpp"

struct tgvd_image {
  tgvd::Image img;
};

struct tgvd_kernel {
  tgvd::Kernel k;
};

struct tgvd_config {
  tgvd::AdmmConfig cfg;
};

struct tgvd_result {
  std::optional<tgvd_image> image;
  std::optional<tgvd_kernel> kernel;
  tgvd::Diagnostics diagnostics;
  std::vector<tgvd::nn::GeneratorParams> params;
};

namespace {

thread_local std::string g_last_error;

tgvd_status status_of(tgvd::ErrorKind kind) {
  switch (kind) {
    case tgvd::ErrorKind::invalid_argument: return TGVD_ERR_INVALID_ARGUMENT;
    case tgvd::ErrorKind::configuration: return TGVD_ERR_CONFIG;
    case tgvd::ErrorKind::numerical: return TGVD_ERR_NUMERICAL;
    case tgvd::ErrorKind::io: return TGVD_ERR_IO;
  }
  return TGVD_ERR_INTERNAL;
}

tgvd_status fail(tgvd_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Runs f, translating exceptions into status codes.
template <class F>
tgvd_status guarded(F&& f) noexcept {
  try {
    f();
    g_last_error.clear();
    return TGVD_OK;
  } catch (const tgvd::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(TGVD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(TGVD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(TGVD_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (!p) throw tgvd::InvalidArgument(std::string(what) + " is NULL");
}

size_t copy_out(const std::string& s, char* buf, size_t len) {
  if (buf && len > 0) {
    const size_t n = std::min(len - 1, s.size());
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
  }
  return s.size();
}

tgvd_iteration to_c(const tgvd::IterationRecord& r) {
  return {r.iteration, r.loss, r.residual_g, r.residual_h, r.kernel_entropy};
}

template <class Solve>
tgvd_status run_solve(const tgvd_config* cfg, tgvd_iteration_fn cb, void* user,
                      tgvd_result** out, Solve&& solve) noexcept {
  if (!out) return fail(TGVD_ERR_INVALID_ARGUMENT, "result pointer is NULL");
  *out = nullptr;
  std::unique_ptr<tgvd_result> res;
  const tgvd_status st = guarded([&] {
    res = std::make_unique<tgvd_result>();
    const tgvd::AdmmConfig config = cfg ? cfg->cfg : tgvd::AdmmConfig{};
    tgvd::IterationCallback on_iter;
    if (cb) {
      on_iter = [cb, user](const tgvd::IterationRecord& r) {
        const tgvd_iteration c = to_c(r);
        cb(&c, user);
      };
    }
    try {
      tgvd::SolveResult sr = solve(config, on_iter);
      res->image.emplace(tgvd_image{std::move(sr.u)});
      res->kernel.emplace(tgvd_kernel{std::move(sr.k)});
      res->diagnostics = std::move(sr.diagnostics);
      if (auto* vs = dynamic_cast<tgvd::VariationalUSolver*>(sr.state.usolver.get())) {
        res->params = vs->prior().params_snapshot();
      }
    } catch (const tgvd::SolveFailure& e) {
      res->diagnostics = e.diagnostics();
      throw;
    }
  });
  // Validation failures happen before any iteration; report them without a
  // result so callers see the usual error path.
  if (st == TGVD_OK || st == TGVD_ERR_NUMERICAL) *out = res.release();
  return st;
}

}  // namespace

extern "C" {

const char* tgvd_version(void) { return TGVDECONV_VERSION_STRING; }

const char* tgvd_last_error(void) { return g_last_error.c_str(); }

const char* tgvd_status_string(tgvd_status status) {
  switch (status) {
    case TGVD_OK: return "ok";
    case TGVD_ERR_INVALID_ARGUMENT: return "invalid argument";
    case TGVD_ERR_CONFIG: return "configuration error";
    case TGVD_ERR_NUMERICAL: return "numerical failure";
    case TGVD_ERR_IO: return "i/o error";
    case TGVD_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void tgvd_set_threads(int n) { tgvd::set_thread_limit(n); }

tgvd_status tgvd_image_create(int height, int width, const double* data,
                              tgvd_image** out) {
  return guarded([&] {
    require(out, "output pointer");
    *out = nullptr;
    if (height < 1 || width < 1) throw tgvd::InvalidArgument("image dimensions must be positive");
    tgvd::Image img(height, width);
    if (data) std::copy(data, data + img.size(), img.data().begin());
    *out = new tgvd_image{std::move(img)};
  });
}

tgvd_status tgvd_image_load(const char* path, tgvd_image** out) {
  return guarded([&] {
    require(out, "output pointer");
    *out = nullptr;
    require(path, "path");
    *out = new tgvd_image{tgvd::read_image(path)};
  });
}

tgvd_status tgvd_image_save(const tgvd_image* img, const char* path) {
  return guarded([&] {
    require(img, "image");
    require(path, "path");
    tgvd::write_image(path, img->img);
  });
}

int tgvd_image_height(const tgvd_image* img) { return img ? img->img.height() : 0; }
int tgvd_image_width(const tgvd_image* img) { return img ? img->img.width() : 0; }
const double* tgvd_image_data(const tgvd_image* img) {
  return img ? img->img.data().data() : nullptr;
}
void tgvd_image_free(tgvd_image* img) { delete img; }

tgvd_status tgvd_make_pattern(int height, int width, uint64_t seed, tgvd_image** out) {
  return guarded([&] {
    require(out, "output pointer");
    *out = nullptr;
    *out = new tgvd_image{tgvd::make_pattern(height, width, seed)};
  });
}

tgvd_status tgvd_kernel_create(int size, const double* weights, tgvd_kernel** out) {
  return guarded([&] {
    require(out, "output pointer");
    *out = nullptr;
    require(weights, "weights");
    if (size < 1 || size > 4096) throw tgvd::InvalidArgument("kernel size out of range");
    std::vector<double> w(weights, weights + static_cast<std::size_t>(size) * size);
    *out = new tgvd_kernel{tgvd::Kernel(size, std::move(w))};
  });
}

tgvd_status tgvd_kernel_from_spec(const char* spec, tgvd_kernel** out) {
  return guarded([&] {
    require(out, "output pointer");
    *out = nullptr;
    require(spec, "spec");
    *out = new tgvd_kernel{tgvd::parse_kernel_spec(spec)};
  });
}

tgvd_status tgvd_kernel_load(const char* path, tgvd_kernel** out) {
  return guarded([&] {
    require(out, "output pointer");
    *out = nullptr;
    require(path, "path");
    *out = new tgvd_kernel{tgvd::read_kernel(path)};
  });
}

tgvd_status tgvd_kernel_save_text(const tgvd_kernel* k, const char* path) {
  return guarded([&] {
    require(k, "kernel");
    require(path, "path");
    tgvd::write_kernel_text(path, k->k);
  });
}

tgvd_status tgvd_kernel_save_image(const tgvd_kernel* k, const char* path) {
  return guarded([&] {
    require(k, "kernel");
    require(path, "path");
    tgvd::write_kernel_png(path, k->k);
  });
}

int tgvd_kernel_size(const tgvd_kernel* k) { return k ? k->k.size() : 0; }
const double* tgvd_kernel_data(const tgvd_kernel* k) {
  return k ? k->k.data().data() : nullptr;
}
void tgvd_kernel_free(tgvd_kernel* k) { delete k; }

tgvd_status tgvd_synthesize(const tgvd_image* clean, const tgvd_kernel* k,
                            double noise_sigma, uint64_t seed, const char* boundary,
                            tgvd_image** out) {
  return guarded([&] {
    require(out, "output pointer");
    *out = nullptr;
    require(clean, "image");
    require(k, "kernel");
    const tgvd::Boundary b =
        boundary ? tgvd::parse_boundary(boundary) : tgvd::Boundary::circular;
    *out = new tgvd_image{tgvd::synthesize(clean->img, k->k, noise_sigma, seed, b)};
  });
}

tgvd_status tgvd_config_create(tgvd_config** out) {
  return guarded([&] {
    require(out, "output pointer");
    *out = new tgvd_config{};
  });
}

tgvd_status tgvd_config_set(tgvd_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    tgvd::set_config_value(cfg->cfg, key, value);
  });
}

tgvd_status tgvd_config_load_file(tgvd_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "config");
    require(path, "path");
    tgvd::load_config_file(cfg->cfg, path);
  });
}

size_t tgvd_config_get(const tgvd_config* cfg, const char* key, char* buf, size_t len) {
  if (!cfg || !key) return copy_out("", buf, len);
  const std::string dump = tgvd::dump_config(cfg->cfg);
  const std::string prefix = std::string(key) + " = ";
  std::size_t pos = 0;
  while (pos < dump.size()) {
    const std::size_t eol = dump.find('\n', pos);
    const std::string line = dump.substr(pos, eol - pos);
    if (line.rfind(prefix, 0) == 0) return copy_out(line.substr(prefix.size()), buf, len);
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  g_last_error = std::string("unknown configuration key '") + key + "'";
  return copy_out("", buf, len);
}

size_t tgvd_config_dump(const tgvd_config* cfg, char* buf, size_t len) {
  return copy_out(cfg ? tgvd::dump_config(cfg->cfg) : std::string(), buf, len);
}

size_t tgvd_config_architecture(const tgvd_config* cfg, int kernel_size, char* buf,
                                size_t len) {
  std::string text;
  const tgvd_status st = guarded([&] {
    require(cfg, "config");
    text = tgvd::nn::ImageGenerator(cfg->cfg.prior.image_arch).descriptor().serialize();
    if (kernel_size > 0) {
      tgvd::nn::KernelGeneratorSpec ks = cfg->cfg.prior.kernel_arch;
      ks.kernel_size = kernel_size;
      text += tgvd::nn::KernelGenerator(ks).descriptor().serialize();
    }
  });
  if (st != TGVD_OK) text.clear();
  return copy_out(text, buf, len);
}

tgvd_status tgvd_config_validate(const tgvd_config* cfg) {
  return guarded([&] {
    require(cfg, "config");
    cfg->cfg.validate();
  });
}

void tgvd_config_free(tgvd_config* cfg) { delete cfg; }

tgvd_status tgvd_solve_blind(const tgvd_image* blurred, int kernel_size,
                             const tgvd_config* cfg, tgvd_iteration_fn cb, void* user,
                             tgvd_result** out) {
  if (!blurred) {
    if (out) *out = nullptr;
    return fail(TGVD_ERR_INVALID_ARGUMENT, "image is NULL");
  }
  return run_solve(cfg, cb, user, out,
                   [&](const tgvd::AdmmConfig& c, const tgvd::IterationCallback& f) {
                     return tgvd::solve_blind(blurred->img, kernel_size, c, f);
                   });
}

tgvd_status tgvd_solve_nonblind(const tgvd_image* blurred, const tgvd_kernel* k,
                                const tgvd_config* cfg, tgvd_iteration_fn cb, void* user,
                                tgvd_result** out) {
  if (!blurred || !k) {
    if (out) *out = nullptr;
    return fail(TGVD_ERR_INVALID_ARGUMENT, blurred ? "kernel is NULL" : "image is NULL");
  }
  return run_solve(cfg, cb, user, out,
                   [&](const tgvd::AdmmConfig& c, const tgvd::IterationCallback& f) {
                     return tgvd::solve_nonblind(blurred->img, k->k, c, f);
                   });
}

const tgvd_image* tgvd_result_image(const tgvd_result* r) {
  return r && r->image ? &*r->image : nullptr;
}

const tgvd_kernel* tgvd_result_kernel(const tgvd_result* r) {
  return r && r->kernel ? &*r->kernel : nullptr;
}

size_t tgvd_result_iterations(const tgvd_result* r) {
  return r ? r->diagnostics.records.size() : 0;
}

tgvd_status tgvd_result_iteration(const tgvd_result* r, size_t index, tgvd_iteration* out) {
  return guarded([&] {
    require(r, "result");
    require(out, "output pointer");
    if (index >= r->diagnostics.records.size()) {
      throw tgvd::InvalidArgument("iteration index out of range");
    }
    *out = to_c(r->diagnostics.records[index]);
  });
}

long tgvd_result_optimiser_steps(const tgvd_result* r) {
  return r ? r->diagnostics.optimiser_steps : 0;
}

tgvd_status tgvd_result_save_checkpoint(const tgvd_result* r, const char* path) {
  return guarded([&] {
    require(r, "result");
    require(path, "path");
    if (r->params.empty()) throw tgvd::InvalidArgument("result holds no generator parameters");
    tgvd::nn::save_checkpoint(path, r->params);
  });
}

void tgvd_result_free(tgvd_result* r) { delete r; }

tgvd_status tgvd_psnr(const tgvd_image* a, const tgvd_image* b, double peak, double* out) {
  return guarded([&] {
    require(a, "image a");
    require(b, "image b");
    require(out, "output pointer");
    *out = tgvd::psnr(a->img, b->img, peak);
  });
}

tgvd_status tgvd_ssim(const tgvd_image* a, const tgvd_image* b, double* out) {
  return guarded([&] {
    require(a, "image a");
    require(b, "image b");
    require(out, "output pointer");
    *out = tgvd::ssim(a->img, b->img);
  });
}

tgvd_status tgvd_kernel_error_compute(const tgvd_kernel* estimate, const tgvd_kernel* truth,
                                      tgvd_kernel_error* out) {
  return guarded([&] {
    require(estimate, "estimate");
    require(truth, "truth");
    require(out, "output pointer");
    const tgvd::KernelError e = tgvd::kernel_error_report(estimate->k, truth->k);
    *out = {e.aligned_mse, e.plain_mse, e.aligned_sse, e.shift_x, e.shift_y};
  });
}

tgvd_status tgvd_selftest(tgvd_selftest_fn cb, void* user, int* failures) {
  return guarded([&] {
    int failed = 0;
    tgvd::run_selftest([&](const tgvd::SelftestCheck& c) {
      if (!c.passed) ++failed;
      if (cb) cb(c.name.c_str(), c.passed ? 1 : 0, c.value, c.tolerance, user);
    });
    if (failures) *failures = failed;
  });
}

}  // extern "C"
