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

// tgvdeconv command-line front end. Talks to the library only through the C
// interface.

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "tgvdeconv/tgvdeconv.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kNumerical = 3, kIo = 4 };

// Status codes and exit codes share the same categories.
struct Failure {
  int code;
  std::string message;
};

int exit_code(tgvd_status s) {
  switch (s) {
    case TGVD_OK: return kOk;
    case TGVD_ERR_INVALID_ARGUMENT:
    case TGVD_ERR_CONFIG: return kUsage;
    case TGVD_ERR_NUMERICAL: return kNumerical;
    case TGVD_ERR_IO: return kIo;
    default: return kInternal;
  }
}

void check(tgvd_status s, const std::string& context) {
  if (s != TGVD_OK) throw Failure{exit_code(s), context + ": " + tgvd_last_error()};
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using ImagePtr = std::unique_ptr<tgvd_image, Deleter<tgvd_image, tgvd_image_free>>;
using KernelPtr = std::unique_ptr<tgvd_kernel, Deleter<tgvd_kernel, tgvd_kernel_free>>;
using ConfigPtr = std::unique_ptr<tgvd_config, Deleter<tgvd_config, tgvd_config_free>>;
using ResultPtr = std::unique_ptr<tgvd_result, Deleter<tgvd_result, tgvd_result_free>>;

ImagePtr load_image(const std::string& path) {
  tgvd_image* img = nullptr;
  check(tgvd_image_load(path.c_str(), &img), "reading " + path);
  return ImagePtr(img);
}

KernelPtr load_kernel(const std::string& path) {
  tgvd_kernel* k = nullptr;
  check(tgvd_kernel_load(path.c_str(), &k), "reading kernel " + path);
  return KernelPtr(k);
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kIo, "cannot open '" + path + "' for hashing"};
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &n);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < n; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

template <class Getter>
std::string read_string(Getter&& get) {
  const size_t n = get(nullptr, 0);
  std::string s(n + 1, '\0');
  get(s.data(), s.size());
  s.resize(n);
  return s;
}

json config_json(const tgvd_config* cfg) {
  const std::string dump =
      read_string([&](char* b, size_t l) { return tgvd_config_dump(cfg, b, l); });
  json j = json::object();
  std::istringstream is(dump);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{kIo, "cannot create '" + dir + "': " + ec.message()};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw Failure{kIo, "cannot write '" + path.string() + "'"};
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{kIo, "cannot open '" + path + "'"};
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Failure{kUsage, path + ": " + e.what()};
  }
}

// Splits "key=value"; CLI11 hands us the raw token.
std::pair<std::string, std::string> split_override(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Failure{kUsage, "--set expects key=value, got '" + kv + "'"};
  }
  return {kv.substr(0, eq), kv.substr(eq + 1)};
}

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

struct SynthesizeArgs {
  std::string input;
  std::string pattern;
  std::string kernel = "gaussian:5:1.0";
  double sigma = 0.0;
  uint64_t seed = 0;
  std::string boundary = "circular";
  std::string out_dir;
};

int cmd_synthesize(const SynthesizeArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  if (a.sigma < 0) throw Failure{kUsage, "--sigma must be nonnegative"};
  if (a.input.empty() == a.pattern.empty()) {
    throw Failure{kUsage, "give exactly one of an input image or --pattern HxW"};
  }
  ImagePtr clean;
  json source;
  if (!a.pattern.empty()) {
    int h = 0, w = 0;
    char x = 0;
    std::istringstream is(a.pattern);
    if (!(is >> h >> x >> w) || x != 'x' || !is.eof()) {
      throw Failure{kUsage, "--pattern expects HxW, got '" + a.pattern + "'"};
    }
    tgvd_image* img = nullptr;
    check(tgvd_make_pattern(h, w, a.seed, &img), "pattern");
    clean.reset(img);
    source = {{"pattern", a.pattern}, {"pattern_seed", a.seed}};
  } else {
    clean = load_image(a.input);
    source = {{"path", a.input}, {"sha256", sha256_file(a.input)}};
  }
  tgvd_kernel* kraw = nullptr;
  check(tgvd_kernel_from_spec(a.kernel.c_str(), &kraw), "kernel spec");
  KernelPtr k(kraw);
  tgvd_image* sraw = nullptr;
  check(tgvd_synthesize(clean.get(), k.get(), a.sigma, a.seed, a.boundary.c_str(), &sraw),
        "synthesis");
  ImagePtr s(sraw);

  make_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  check(tgvd_image_save(clean.get(), (dir / "clean.png").c_str()), "writing clean.png");
  check(tgvd_image_save(clean.get(), (dir / "clean.f64").c_str()), "writing clean.f64");
  check(tgvd_image_save(s.get(), (dir / "blurred.png").c_str()), "writing blurred.png");
  check(tgvd_image_save(s.get(), (dir / "blurred.f64").c_str()), "writing blurred.f64");
  check(tgvd_kernel_save_text(k.get(), (dir / "kernel.txt").c_str()), "writing kernel.txt");
  check(tgvd_kernel_save_image(k.get(), (dir / "kernel.png").c_str()), "writing kernel.png");

  json m = {{"command", "synthesize"},
            {"version", tgvd_version()},
            {"source", source},
            {"kernel_spec", a.kernel},
            {"noise_sigma", a.sigma},
            {"seed", a.seed},
            {"boundary", a.boundary},
            {"outputs",
             {{"blurred.f64", sha256_file((dir / "blurred.f64").string())},
              {"kernel.txt", sha256_file((dir / "kernel.txt").string())}}},
            {"duration_seconds", elapsed_seconds(t0)}};
  write_json(dir / "manifest.json", m);
  std::cout << "wrote " << (dir / "blurred.png").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct DeblurArgs {
  std::string input;
  std::string mode;
  int kernel_size = 0;
  std::string kernel;
  std::string config;
  std::vector<std::string> overrides;
  std::string replay;
  std::string out_dir;
  bool checkpoint = false;
  bool quiet = false;
};

void on_iteration(const tgvd_iteration* r, void* user) {
  if (*static_cast<bool*>(user)) return;
  std::fprintf(stderr, "iter %3d  loss %.6e  r_g %.4e  r_h %.4e  H(k) %.4f\n", r->iteration,
               r->loss, r->residual_g, r->residual_h, r->kernel_entropy);
}

void write_diagnostics(const fs::path& path, const tgvd_result* r) {
  std::ofstream out(path);
  out << "iteration,loss,residual_g,residual_h\n";
  char line[160];
  for (size_t i = 0; r && i < tgvd_result_iterations(r); ++i) {
    tgvd_iteration it{};
    tgvd_result_iteration(r, i, &it);
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g\n", it.iteration, it.loss,
                  it.residual_g, it.residual_h);
    out << line;
  }
  if (!out) throw Failure{kIo, "cannot write '" + path.string() + "'"};
}

int cmd_deblur(DeblurArgs a) {
  const auto t0 = std::chrono::steady_clock::now();
  ConfigPtr cfg;
  {
    tgvd_config* c = nullptr;
    check(tgvd_config_create(&c), "config");
    cfg.reset(c);
  }

  json replayed;
  if (!a.replay.empty()) {
    replayed = read_json(a.replay);
    if (replayed.value("command", "") != "deblur") {
      throw Failure{kUsage, a.replay + " is not a deblur manifest"};
    }
    if (a.input.empty()) a.input = replayed.at("input").at("path").get<std::string>();
    if (a.mode.empty()) a.mode = replayed.at("mode").get<std::string>();
    if (a.kernel_size == 0) a.kernel_size = replayed.value("kernel_size", 0);
    if (a.kernel.empty() && replayed.contains("kernel")) {
      a.kernel = replayed["kernel"].at("path").get<std::string>();
    }
    for (const auto& [key, value] : replayed.at("config").items()) {
      check(tgvd_config_set(cfg.get(), key.c_str(), value.get<std::string>().c_str()),
            "manifest config");
    }
    if (replayed.contains("threads")) tgvd_set_threads(replayed["threads"].get<int>());
  }
  if (a.input.empty()) throw Failure{kUsage, "deblur needs an input image"};
  if (a.mode != "blind" && a.mode != "nonblind") {
    throw Failure{kUsage, "--mode must be blind or nonblind"};
  }
  if (a.mode == "blind" && a.kernel_size <= 0) {
    throw Failure{kUsage, "blind mode requires --kernel-size"};
  }
  if (a.mode == "nonblind" && a.kernel.empty()) {
    throw Failure{kUsage, "nonblind mode requires --kernel"};
  }
  if (!a.config.empty()) check(tgvd_config_load_file(cfg.get(), a.config.c_str()), "config");
  for (const auto& kv : a.overrides) {
    const auto [key, value] = split_override(kv);
    check(tgvd_config_set(cfg.get(), key.c_str(), value.c_str()), "--set " + key);
  }
  check(tgvd_config_validate(cfg.get()), "config");

  const std::string input_hash = sha256_file(a.input);
  if (!replayed.is_null()) {
    const std::string want = replayed["input"].value("sha256", "");
    if (!want.empty() && want != input_hash) {
      std::cerr << "warning: input differs from the replayed manifest\n";
    }
  }
  ImagePtr s = load_image(a.input);
  KernelPtr known;
  if (a.mode == "nonblind") known = load_kernel(a.kernel);

  make_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  tgvd_result* rraw = nullptr;
  const tgvd_status st =
      a.mode == "blind"
          ? tgvd_solve_blind(s.get(), a.kernel_size, cfg.get(), on_iteration, &a.quiet, &rraw)
          : tgvd_solve_nonblind(s.get(), known.get(), cfg.get(), on_iteration, &a.quiet,
                                &rraw);
  const std::string solve_error = st == TGVD_OK ? "" : tgvd_last_error();
  ResultPtr result(rraw);
  write_diagnostics(dir / "diagnostics.csv", result.get());

  const int ksize = a.mode == "blind" ? a.kernel_size : 0;
  json m = {
      {"command", "deblur"},
      {"version", tgvd_version()},
      {"mode", a.mode},
      {"input", {{"path", a.input}, {"sha256", input_hash}}},
      {"seed", read_string([&](char* b, size_t l) {
         return tgvd_config_get(cfg.get(), "seed", b, l);
       })},
      {"config", config_json(cfg.get())},
      {"architecture", read_string([&](char* b, size_t l) {
         return tgvd_config_architecture(cfg.get(), ksize, b, l);
       })},
  };
  if (a.mode == "blind") m["kernel_size"] = a.kernel_size;
  if (a.mode == "nonblind") m["kernel"] = {{"path", a.kernel}, {"sha256", sha256_file(a.kernel)}};
  if (const char* env = std::getenv("TGVDECONV_THREADS")) m["threads"] = std::atoi(env);
  if (result) m["optimiser_steps"] = tgvd_result_optimiser_steps(result.get());

  if (st != TGVD_OK) {
    m["status"] = tgvd_status_string(st);
    m["error"] = solve_error;
    m["duration_seconds"] = elapsed_seconds(t0);
    write_json(dir / "manifest.json", m);
    throw Failure{exit_code(st), "solve failed: " + solve_error};
  }

  const tgvd_image* u = tgvd_result_image(result.get());
  const tgvd_kernel* k = tgvd_result_kernel(result.get());
  check(tgvd_image_save(u, (dir / "u.png").c_str()), "writing u.png");
  check(tgvd_image_save(u, (dir / "u.f64").c_str()), "writing u.f64");
  check(tgvd_kernel_save_text(k, (dir / "kernel.txt").c_str()), "writing kernel.txt");
  check(tgvd_kernel_save_image(k, (dir / "kernel.png").c_str()), "writing kernel.png");
  if (a.checkpoint) {
    check(tgvd_result_save_checkpoint(result.get(), (dir / "generators.ckpt").c_str()),
          "writing checkpoint");
  }
  m["status"] = "ok";
  m["outputs"] = {{"u.f64", sha256_file((dir / "u.f64").string())},
                  {"kernel.txt", sha256_file((dir / "kernel.txt").string())}};
  m["duration_seconds"] = elapsed_seconds(t0);
  write_json(dir / "manifest.json", m);
  if (!a.quiet) std::cout << "wrote " << (dir / "u.png").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string recovered;
  std::string reference;
  std::string kernel_est;
  std::string kernel_true;
  std::string csv;
  std::string label;
};

int cmd_evaluate(const EvaluateArgs& a) {
  if (a.kernel_est.empty() != a.kernel_true.empty()) {
    throw Failure{kUsage, "--kernel-est and --kernel-true go together"};
  }
  ImagePtr rec = load_image(a.recovered);
  ImagePtr ref = load_image(a.reference);
  double psnr = 0, ssim = 0;
  check(tgvd_psnr(rec.get(), ref.get(), 1.0, &psnr), "psnr");
  check(tgvd_ssim(rec.get(), ref.get(), &ssim), "ssim");

  char buf[256];
  std::snprintf(buf, sizeof buf, "psnr %.4f\nssim %.6f\n", psnr, ssim);
  std::cout << buf;
  std::string header = "label,psnr,ssim";
  std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g", a.label.c_str(), psnr, ssim);
  std::string row = buf;

  if (!a.kernel_est.empty()) {
    KernelPtr ke = load_kernel(a.kernel_est);
    KernelPtr kt = load_kernel(a.kernel_true);
    tgvd_kernel_error e{};
    check(tgvd_kernel_error_compute(ke.get(), kt.get(), &e), "kernel error");
    std::snprintf(buf, sizeof buf,
                  "kernel_error %.6g (unaligned %.6g, summed %.6g, shift %d,%d)\n",
                  e.aligned_mse, e.plain_mse, e.aligned_sse, e.shift_x, e.shift_y);
    std::cout << buf;
    header += ",kernel_error,kernel_error_unaligned,kernel_error_summed";
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g", e.aligned_mse, e.plain_mse,
                  e.aligned_sse);
    row += buf;
  }
  std::cout << header << "\n" << row << "\n";
  if (!a.csv.empty()) {
    const bool fresh = !fs::exists(a.csv) || fs::file_size(a.csv) == 0;
    std::ofstream out(a.csv, std::ios::app);
    if (fresh) out << header << "\n";
    out << row << "\n";
    if (!out) throw Failure{kIo, "cannot append to '" + a.csv + "'"};
  }
  return kOk;
}

// ---------------------------------------------------------------------------

void on_check(const char* name, int passed, double value, double tol, void*) {
  std::printf("%-4s %-40s %.3e (limit %.1e)\n", passed ? "ok" : "FAIL", name, value, tol);
}

int cmd_selftest() {
  int failures = 0;
  check(tgvd_selftest(on_check, nullptr, &failures), "selftest");
  std::printf("%d check(s) failed\n", failures);
  return failures == 0 ? kOk : kInternal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind and non-blind image deconvolution with a TGV-regularised "
               "variational deep image prior"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tgvd_version()));
  int threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (default: TGVDECONV_THREADS)");

  SynthesizeArgs sa;
  auto* syn = app.add_subcommand("synthesize", "Blur (and optionally noise) a clean image");
  syn->add_option("input", sa.input, "Clean image (.png, .pgm, .f64)");
  syn->add_option("--pattern", sa.pattern, "Use the built-in test scene of size HxW");
  syn->add_option("--kernel", sa.kernel, "gaussian:K:sigma, motion:K:length:angle or file:path")
      ->capture_default_str();
  syn->add_option("--sigma", sa.sigma, "Gaussian noise standard deviation")
      ->capture_default_str();
  syn->add_option("--seed", sa.seed, "Noise and pattern seed")->capture_default_str();
  syn->add_option("--boundary", sa.boundary, "circular or replicate")->capture_default_str();
  syn->add_option("-o,--out-dir", sa.out_dir, "Output directory")->required();

  DeblurArgs da;
  auto* deb = app.add_subcommand("deblur", "Recover a sharp image (and kernel)");
  deb->add_option("input", da.input, "Blurred image");
  deb->add_option("--mode", da.mode, "blind or nonblind");
  deb->add_option("--kernel-size", da.kernel_size, "Odd kernel size for blind mode");
  deb->add_option("--kernel", da.kernel, "Known kernel for nonblind mode");
  deb->add_option("--config", da.config, "key = value configuration file");
  deb->add_option("--set", da.overrides, "Override a configuration key (key=value)")
      ->take_all();
  deb->add_option("--replay", da.replay, "Rerun from a previous manifest.json");
  deb->add_option("-o,--out-dir", da.out_dir, "Output directory")->required();
  deb->add_flag("--checkpoint", da.checkpoint, "Also save generator parameters");
  deb->add_flag("-q,--quiet", da.quiet, "No per-iteration log");

  EvaluateArgs ea;
  auto* ev = app.add_subcommand("evaluate", "Compare a result against ground truth");
  ev->add_option("recovered", ea.recovered, "Recovered image")->required();
  ev->add_option("reference", ea.reference, "Reference image")->required();
  ev->add_option("--kernel-est", ea.kernel_est, "Estimated kernel");
  ev->add_option("--kernel-true", ea.kernel_true, "True kernel");
  ev->add_option("--csv", ea.csv, "Append the CSV row to this file");
  ev->add_option("--label", ea.label, "First CSV column");

  auto* st = app.add_subcommand("selftest", "Run the built-in property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (threads > 0) tgvd_set_threads(threads);
    if (syn->parsed()) return cmd_synthesize(sa);
    if (deb->parsed()) return cmd_deblur(da);
    if (ev->parsed()) return cmd_evaluate(ea);
    if (st->parsed()) return cmd_selftest();
  } catch (const Failure& f) {
    std::cerr << "tgvdeconv: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "tgvdeconv: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
