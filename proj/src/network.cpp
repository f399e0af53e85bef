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

#include "tgvdeconv/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "tgvdeconv/error.hpp"

namespace tgvd::nn {

namespace {

// ---------------------------------------------------------------------------
// Layer primitives

// "Same" zero-padded convolution (cross-correlation, as in every deep
// learning framework). W is [cout][cin][k][k].
Tensor conv_forward(const Tensor& in, const double* W, const double* b,
                    int cout, int k) {
  const int cin = in.channels, H = in.height, Wd = in.width, p = k / 2;
  Tensor out(cout, H, Wd);
#pragma omp parallel for schedule(static)
  for (int co = 0; co < cout; ++co) {
    double* o = out.plane(co);
    std::fill(o, o + out.plane_size(), b[co]);
    for (int ci = 0; ci < cin; ++ci) {
      const double* src = in.plane(ci);
      const double* wk = W + (static_cast<std::size_t>(co) * cin + ci) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - p;
        const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - p;
          const int x0 = std::max(0, -dx), x1 = std::min(Wd, Wd - dx);
          const double wv = wk[ky * k + kx];
          for (int y = y0; y < y1; ++y) {
            double* orow = o + static_cast<std::size_t>(y) * Wd;
            const double* irow = src + static_cast<std::size_t>(y + dy) * Wd + dx;
#pragma omp simd
            for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
          }
        }
      }
    }
  }
  return out;
}

void conv_backward(const Tensor& in, const double* W, const Tensor& dout,
                   int k, Tensor* din, double* dW, double* db) {
  const int cin = in.channels, cout = dout.channels;
  const int H = in.height, Wd = in.width, p = k / 2;

#pragma omp parallel for schedule(static)
  for (int co = 0; co < cout; ++co) {
    const double* g = dout.plane(co);
    double acc = 0.0;
    for (std::size_t i = 0; i < dout.plane_size(); ++i) acc += g[i];
    db[co] += acc;
    for (int ci = 0; ci < cin; ++ci) {
      const double* src = in.plane(ci);
      double* dwk = dW + (static_cast<std::size_t>(co) * cin + ci) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - p;
        const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - p;
          const int x0 = std::max(0, -dx), x1 = std::min(Wd, Wd - dx);
          double s = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* grow = g + static_cast<std::size_t>(y) * Wd;
            const double* irow = src + static_cast<std::size_t>(y + dy) * Wd + dx;
#pragma omp simd reduction(+ : s)
            for (int x = x0; x < x1; ++x) s += grow[x] * irow[x];
          }
          dwk[ky * k + kx] += s;
        }
      }
    }
  }

  if (!din) return;
  *din = Tensor(cin, H, Wd);
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < cin; ++ci) {
    double* d = din->plane(ci);
    for (int co = 0; co < cout; ++co) {
      const double* g = dout.plane(co);
      const double* wk = W + (static_cast<std::size_t>(co) * cin + ci) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - p;
        const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - p;
          const int x0 = std::max(0, -dx), x1 = std::min(Wd, Wd - dx);
          const double wv = wk[ky * k + kx];
          for (int y = y0; y < y1; ++y) {
            const double* grow = g + static_cast<std::size_t>(y) * Wd;
            double* drow = d + static_cast<std::size_t>(y + dy) * Wd + dx;
#pragma omp simd
            for (int x = x0; x < x1; ++x) drow[x] += wv * grow[x];
          }
        }
      }
    }
  }
}

void elu_inplace(Tensor& t) {
  for (double& v : t.data) v = v > 0.0 ? v : std::expm1(v);
}

// d(pre) from d(post), using the cached post-activation value.
void elu_backward_inplace(const Tensor& post, Tensor& grad) {
  for (std::size_t i = 0; i < grad.data.size(); ++i) {
    const double y = post.data[i];
    grad.data[i] *= y > 0.0 ? 1.0 : y + 1.0;
  }
}

// 2x2 average pooling; odd trailing rows/columns average what is present.
Tensor avg_pool(const Tensor& in) {
  const int H = (in.height + 1) / 2, W = (in.width + 1) / 2;
  Tensor out(in.channels, H, W);
  for (int c = 0; c < in.channels; ++c) {
    const double* s = in.plane(c);
    double* o = out.plane(c);
    for (int y = 0; y < H; ++y) {
      const int ya = 2 * y, yb = std::min(2 * y + 1, in.height - 1);
      for (int x = 0; x < W; ++x) {
        const int xa = 2 * x, xb = std::min(2 * x + 1, in.width - 1);
        double acc = 0.0;
        int n = 0;
        for (int yy = ya; yy <= yb; ++yy) {
          for (int xx = xa; xx <= xb; ++xx) {
            acc += s[yy * in.width + xx];
            ++n;
          }
        }
        o[y * W + x] = acc / n;
      }
    }
  }
  return out;
}

Tensor avg_pool_backward(const Tensor& dout, int in_h, int in_w) {
  Tensor din(dout.channels, in_h, in_w);
  for (int c = 0; c < dout.channels; ++c) {
    const double* g = dout.plane(c);
    double* d = din.plane(c);
    for (int y = 0; y < dout.height; ++y) {
      const int ya = 2 * y, yb = std::min(2 * y + 1, in_h - 1);
      for (int x = 0; x < dout.width; ++x) {
        const int xa = 2 * x, xb = std::min(2 * x + 1, in_w - 1);
        const int n = (yb - ya + 1) * (xb - xa + 1);
        const double v = g[y * dout.width + x] / n;
        for (int yy = ya; yy <= yb; ++yy) {
          for (int xx = xa; xx <= xb; ++xx) d[yy * in_w + xx] += v;
        }
      }
    }
  }
  return din;
}

// Nearest-neighbour upsampling to (H, W); source pixel (y/2, x/2).
Tensor upsample(const Tensor& in, int H, int W) {
  Tensor out(in.channels, H, W);
  for (int c = 0; c < in.channels; ++c) {
    const double* s = in.plane(c);
    double* o = out.plane(c);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) o[y * W + x] = s[(y / 2) * in.width + x / 2];
    }
  }
  return out;
}

Tensor upsample_backward(const Tensor& dout, int in_h, int in_w) {
  Tensor din(dout.channels, in_h, in_w);
  for (int c = 0; c < dout.channels; ++c) {
    const double* g = dout.plane(c);
    double* d = din.plane(c);
    for (int y = 0; y < dout.height; ++y) {
      for (int x = 0; x < dout.width; ++x) {
        d[(y / 2) * in_w + x / 2] += g[y * dout.width + x];
      }
    }
  }
  return din;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  Tensor out(a.channels + b.channels, a.height, a.width);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
  return out;
}

void split(const Tensor& t, int first, Tensor& a, Tensor& b) {
  a = Tensor(first, t.height, t.width);
  b = Tensor(t.channels - first, t.height, t.width);
  std::copy(t.data.begin(), t.data.begin() + a.data.size(), a.data.begin());
  std::copy(t.data.begin() + a.data.size(), t.data.end(), b.data.begin());
}

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

// Per-channel normalisation over the spatial extent (batch normalisation
// with a batch of one) followed by a learned scale and shift.
constexpr double kNormEps = 1e-5;

void norm_forward(Tensor& t, const double* scale, const double* shift,
                  NormState* st) {
  const std::size_t n = t.plane_size();
  if (st) {
    st->xhat = Tensor(t.channels, t.height, t.width);
    st->inv_std.assign(t.channels, 0.0);
  }
  for (int c = 0; c < t.channels; ++c) {
    double* v = t.plane(c);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += v[i];
    mean /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (v[i] - mean) * (v[i] - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + kNormEps);
    for (std::size_t i = 0; i < n; ++i) {
      const double xh = (v[i] - mean) * inv;
      if (st) st->xhat.plane(c)[i] = xh;
      v[i] = scale[c] * xh + shift[c];
    }
    if (st) st->inv_std[c] = inv;
  }
}

// grad holds d(out) on entry and d(in) on exit.
void norm_backward(const NormState& st, const double* scale,
                   Tensor& grad, double* dscale, double* dshift) {
  const std::size_t n = grad.plane_size();
  for (int c = 0; c < grad.channels; ++c) {
    double* g = grad.plane(c);
    const double* xh = st.xhat.plane(c);
    double sg = 0.0, sgx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sg += g[i];
      sgx += g[i] * xh[i];
    }
    dshift[c] += sg;
    dscale[c] += sgx;
    const double k = scale[c] * st.inv_std[c];
    const double mg = sg / n, mgx = sgx / n;
    for (std::size_t i = 0; i < n; ++i) g[i] = k * (g[i] - mg - xh[i] * mgx);
  }
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void init_uniform(std::span<double> v, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& x : v) x = dist(rng);
}

std::size_t shape_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

// Little-endian I/O helpers for checkpoints.
void put_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t get_le(std::istream& is, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = is.get();
    if (c == EOF) throw IoError("checkpoint: unexpected end of file");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// ArchitectureDescriptor

void ArchitectureDescriptor::set_attribute(const std::string& key,
                                           const std::string& value) {
  for (auto& [k, v] : attributes_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  attributes_.emplace_back(key, value);
}

const std::string& ArchitectureDescriptor::attribute(const std::string& key) const {
  for (const auto& [k, v] : attributes_) {
    if (k == key) return v;
  }
  throw ConfigError("architecture has no attribute '" + key + "'");
}

const ParamBlock& ArchitectureDescriptor::add_block(const std::string& name,
                                                    std::vector<int> shape) {
  ParamBlock b;
  b.name = name;
  b.count = shape_count(shape);
  b.shape = std::move(shape);
  b.offset = count_;
  count_ += b.count;
  blocks_.push_back(std::move(b));
  return blocks_.back();
}

const ParamBlock& ArchitectureDescriptor::block(const std::string& name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  throw ConfigError("architecture has no parameter block '" + name + "'");
}

std::string ArchitectureDescriptor::serialize() const {
  std::ostringstream os;
  os << "kind " << kind_ << '\n';
  for (const auto& [k, v] : attributes_) os << "attr " << k << ' ' << v << '\n';
  for (const auto& b : blocks_) {
    os << "block " << b.name;
    for (int d : b.shape) os << ' ' << d;
    os << '\n';
  }
  return os.str();
}

ArchitectureDescriptor ArchitectureDescriptor::parse(const std::string& text) {
  ArchitectureDescriptor a;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "kind") {
      ls >> a.kind_;
    } else if (tag == "attr") {
      std::string k, v;
      ls >> k >> v;
      a.set_attribute(k, v);
    } else if (tag == "block") {
      std::string name;
      ls >> name;
      std::vector<int> shape;
      int d;
      while (ls >> d) shape.push_back(d);
      a.add_block(name, std::move(shape));
    } else {
      throw ConfigError("architecture descriptor: unknown line '" + line + "'");
    }
  }
  return a;
}

void GeneratorParams::validate() const {
  if (values.size() != arch.parameter_count()) {
    throw ConfigError("generator parameters: expected " +
                      std::to_string(arch.parameter_count()) + " values for " +
                      arch.kind() + ", got " + std::to_string(values.size()));
  }
}

std::span<double> GeneratorParams::block(const std::string& name) {
  const ParamBlock& b = arch.block(name);
  return std::span<double>(values).subspan(b.offset, b.count);
}

std::span<const double> GeneratorParams::block(const std::string& name) const {
  const ParamBlock& b = arch.block(name);
  return std::span<const double>(values).subspan(b.offset, b.count);
}

void zero_output_heads(GeneratorParams& params) {
  for (const auto& b : params.arch.blocks()) {
    if (b.name.starts_with("head_")) {
      std::fill_n(params.values.begin() + b.offset, b.count, 0.0);
    }
  }
}

// ---------------------------------------------------------------------------
// ImageGenerator

ImageGenerator::ImageGenerator(ImageGeneratorSpec spec)
    : spec_(spec), arch_("image_generator") {
  if (spec_.input_channels < 1 || spec_.skip_channels < 1 ||
      std::any_of(spec_.channels.begin(), spec_.channels.end(),
                  [](int c) { return c < 1; })) {
    throw ConfigError("image generator: channel counts must be positive");
  }
  if (!(spec_.latent_scale > 0.0)) {
    throw ConfigError("image generator: latent scale must be positive");
  }
  const int cin = spec_.input_channels, s = spec_.skip_channels;
  const auto [c0, c1, c2] = spec_.channels;
  arch_.set_attribute("input_channels", std::to_string(cin));
  arch_.set_attribute("channels", std::to_string(c0) + "," +
                                      std::to_string(c1) + "," +
                                      std::to_string(c2));
  arch_.set_attribute("skip_channels", std::to_string(s));
  // Normalised layers carry no bias; the shift replaces it.
  auto layer = [&](const std::string& name, int cout, int cin_, int k) {
    arch_.add_block(name + ".w", {cout, cin_, k, k});
    arch_.add_block(name + ".scale", {cout});
    arch_.add_block(name + ".shift", {cout});
  };
  layer("enc1", c0, cin, 3);
  layer("enc2", c1, c0, 3);
  layer("enc3", c2, c1, 3);
  layer("skip1", s, c0, 1);
  layer("skip2", s, c1, 1);
  layer("dec2", c1, c2 + s, 3);
  layer("dec1", c0, c1 + s, 3);
  arch_.add_block("head_mean.w", {1, c0, 1, 1});
  arch_.add_block("head_mean.b", {1});
  arch_.add_block("head_logstd.w", {1, c0, 1, 1});
  arch_.add_block("head_logstd.b", {1});
}

GeneratorParams ImageGenerator::initialize(std::uint64_t seed) const {
  GeneratorParams p{arch_, std::vector<double>(arch_.parameter_count())};
  std::mt19937_64 rng(seed);
  for (const auto& b : arch_.blocks()) {
    auto v = p.block(b.name);
    if (b.name.ends_with(".scale")) {
      std::fill(v.begin(), v.end(), 1.0);
    } else if (b.name.ends_with(".shift") || b.name.ends_with(".b")) {
      std::fill(v.begin(), v.end(), 0.0);
    } else {
      const double fan_in = static_cast<double>(b.shape[1] * b.shape[2] * b.shape[3]);
      double bound = 1.0 / std::sqrt(fan_in);
      if (b.name.starts_with("head_logstd")) bound *= 0.1;
      init_uniform(v, bound, rng);
    }
  }
  p.block("head_logstd.b")[0] = spec_.initial_log_std;
  return p;
}

Tensor ImageGenerator::make_latent(int height, int width,
                                   std::uint64_t seed) const {
  Tensor z(spec_.input_channels, height, width);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, spec_.latent_scale);
  for (double& v : z.data) v = dist(rng);
  return z;
}

void ImageGenerator::check(const GeneratorParams& params, const Tensor& z) const {
  params.validate();
  if (!(params.arch == arch_)) {
    throw ConfigError("image generator: parameter architecture mismatch");
  }
  if (z.channels != spec_.input_channels || z.height < 1 || z.width < 1) {
    throw ConfigError("image generator: latent has " +
                      std::to_string(z.channels) + " channels, expected " +
                      std::to_string(spec_.input_channels));
  }
}

ImageGeneratorOutput ImageGenerator::forward(const GeneratorParams& params,
                                             const Tensor& z,
                                             Cache* cache) const {
  check(params, z);
  const auto [c0, c1, c2] = spec_.channels;
  const int s = spec_.skip_channels;
  auto w = [&](const std::string& name) { return params.block(name).data(); };
  const std::vector<double> no_bias(std::max({c0, c1, c2, s}), 0.0);

  Cache local;
  Cache& c = cache ? *cache : local;
  // conv -> norm -> ELU
  auto block = [&](const Tensor& in, const std::string& name, int cout, int k,
                   NormState& st) {
    Tensor t = conv_forward(in, w(name + ".w"), no_bias.data(), cout, k);
    norm_forward(t, w(name + ".scale"), w(name + ".shift"), cache ? &st : nullptr);
    elu_inplace(t);
    return t;
  };
  c.z = z;
  c.e1 = block(z, "enc1", c0, 3, c.n_e1);
  c.p1 = avg_pool(c.e1);
  c.e2 = block(c.p1, "enc2", c1, 3, c.n_e2);
  c.p2 = avg_pool(c.e2);
  c.e3 = block(c.p2, "enc3", c2, 3, c.n_e3);
  c.s1 = block(c.e1, "skip1", s, 1, c.n_s1);
  c.s2 = block(c.e2, "skip2", s, 1, c.n_s2);
  c.cat2 = concat(upsample(c.e3, c.e2.height, c.e2.width), c.s2);
  c.d2 = block(c.cat2, "dec2", c1, 3, c.n_d2);
  c.cat1 = concat(upsample(c.d2, c.e1.height, c.e1.width), c.s1);
  c.d1 = block(c.cat1, "dec1", c0, 3, c.n_d1);

  const Tensor mean_pre = conv_forward(c.d1, w("head_mean.w"), w("head_mean.b"), 1, 1);
  const Tensor log_std = conv_forward(c.d1, w("head_logstd.w"), w("head_logstd.b"), 1, 1);

  ImageGeneratorOutput out{Image(z.height, z.width), Image(z.height, z.width)};
  for (std::size_t i = 0; i < out.mean.size(); ++i) {
    out.mean[i] = sigmoid(mean_pre.data[i]);
    out.log_std[i] = log_std.data[i];
  }
  c.mean = out.mean;
  return out;
}

void ImageGenerator::backward(const GeneratorParams& params, const Cache& c,
                              const Image& d_mean, const Image& d_log_std,
                              std::span<double> grad) const {
  check(params, c.z);
  if (grad.size() != params.values.size()) {
    throw InvalidArgument("image generator: gradient buffer size mismatch");
  }
  if (!d_mean.same_shape(c.mean) || !d_log_std.same_shape(c.mean)) {
    throw InvalidArgument("image generator: output gradient shape mismatch");
  }
  if (c.n_d1.inv_std.empty()) {
    throw InvalidArgument("image generator: cache was not filled by forward()");
  }
  const int c1 = spec_.channels[1], c2 = spec_.channels[2];
  auto w = [&](const std::string& name) { return params.block(name).data(); };
  auto g = [&](const std::string& name) {
    return grad.data() + arch_.block(name).offset;
  };
  std::vector<double> scratch_db(std::max({spec_.channels[0], c1, c2, spec_.skip_channels}));
  // d(post-ELU) -> d(input); accumulates parameter gradients.
  auto block_back = [&](const Tensor& in, const Tensor& post, const NormState& st,
                        const std::string& name, int k, Tensor& dpost, Tensor* din) {
    elu_backward_inplace(post, dpost);
    norm_backward(st, w(name + ".scale"), dpost, g(name + ".scale"), g(name + ".shift"));
    conv_backward(in, w(name + ".w"), dpost, k, din, g(name + ".w"), scratch_db.data());
  };

  const int H = c.z.height, W = c.z.width;
  Tensor d_mean_pre(1, H, W), d_logstd_pre(1, H, W);
  for (std::size_t i = 0; i < c.mean.size(); ++i) {
    const double m = c.mean[i];
    d_mean_pre.data[i] = d_mean[i] * m * (1.0 - m);
    d_logstd_pre.data[i] = d_log_std[i];
  }

  Tensor d_d1, tmp;
  conv_backward(c.d1, w("head_mean.w"), d_mean_pre, 1, &d_d1, g("head_mean.w"),
                g("head_mean.b"));
  conv_backward(c.d1, w("head_logstd.w"), d_logstd_pre, 1, &tmp,
                g("head_logstd.w"), g("head_logstd.b"));
  add_into(d_d1, tmp);

  Tensor d_cat1;
  block_back(c.cat1, c.d1, c.n_d1, "dec1", 3, d_d1, &d_cat1);
  Tensor d_up1, d_s1;
  split(d_cat1, c1, d_up1, d_s1);
  Tensor d_d2 = upsample_backward(d_up1, c.d2.height, c.d2.width);

  Tensor d_e1;
  block_back(c.e1, c.s1, c.n_s1, "skip1", 1, d_s1, &d_e1);

  Tensor d_cat2;
  block_back(c.cat2, c.d2, c.n_d2, "dec2", 3, d_d2, &d_cat2);
  Tensor d_up2, d_s2;
  split(d_cat2, c2, d_up2, d_s2);
  Tensor d_e3 = upsample_backward(d_up2, c.e3.height, c.e3.width);

  Tensor d_e2;
  block_back(c.e2, c.s2, c.n_s2, "skip2", 1, d_s2, &d_e2);

  Tensor d_p2;
  block_back(c.p2, c.e3, c.n_e3, "enc3", 3, d_e3, &d_p2);
  add_into(d_e2, avg_pool_backward(d_p2, c.e2.height, c.e2.width));

  Tensor d_p1;
  block_back(c.p1, c.e2, c.n_e2, "enc2", 3, d_e2, &d_p1);
  add_into(d_e1, avg_pool_backward(d_p1, c.e1.height, c.e1.width));

  block_back(c.z, c.e1, c.n_e1, "enc1", 3, d_e1, nullptr);
}

// ---------------------------------------------------------------------------
// KernelGenerator

KernelGenerator::KernelGenerator(KernelGeneratorSpec spec)
    : spec_(spec), arch_("kernel_generator") {
  if (spec_.kernel_size < 1 || spec_.kernel_size % 2 == 0) {
    throw ConfigError("kernel generator: kernel size must be odd and positive");
  }
  if (spec_.latent_dim < 1 || spec_.hidden < 1) {
    throw ConfigError("kernel generator: layer widths must be positive");
  }
  const int kk = spec_.kernel_size * spec_.kernel_size;
  arch_.set_attribute("kernel_size", std::to_string(spec_.kernel_size));
  arch_.set_attribute("latent_dim", std::to_string(spec_.latent_dim));
  arch_.set_attribute("hidden", std::to_string(spec_.hidden));
  arch_.add_block("fc1.w", {spec_.hidden, spec_.latent_dim});
  arch_.add_block("fc1.b", {spec_.hidden});
  arch_.add_block("head_logits.w", {kk, spec_.hidden});
  arch_.add_block("head_logits.b", {kk});
  arch_.add_block("head_logstd.w", {kk, spec_.hidden});
  arch_.add_block("head_logstd.b", {kk});
}

GeneratorParams KernelGenerator::initialize(std::uint64_t seed) const {
  GeneratorParams p{arch_, std::vector<double>(arch_.parameter_count())};
  std::mt19937_64 rng(seed);
  init_uniform(p.block("fc1.w"), 1.0 / std::sqrt(spec_.latent_dim), rng);
  init_uniform(p.block("fc1.b"), 1.0 / std::sqrt(spec_.latent_dim), rng);
  const double head = 1.0 / std::sqrt(spec_.hidden);
  init_uniform(p.block("head_logits.w"), spec_.logits_init_scale * head, rng);
  init_uniform(p.block("head_logits.b"), spec_.logits_init_scale * head, rng);
  init_uniform(p.block("head_logstd.w"), 0.1 * head, rng);
  auto b = p.block("head_logstd.b");
  std::fill(b.begin(), b.end(), spec_.initial_log_std);
  return p;
}

std::vector<double> KernelGenerator::make_latent(std::uint64_t seed) const {
  std::vector<double> z(spec_.latent_dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (double& v : z) v = dist(rng);
  return z;
}

void KernelGenerator::check(const GeneratorParams& params,
                            std::size_t latent) const {
  params.validate();
  if (!(params.arch == arch_)) {
    throw ConfigError("kernel generator: parameter architecture mismatch");
  }
  if (latent != static_cast<std::size_t>(spec_.latent_dim)) {
    throw ConfigError("kernel generator: latent has " + std::to_string(latent) +
                      " entries, expected " + std::to_string(spec_.latent_dim));
  }
}

KernelGeneratorOutput KernelGenerator::forward(const GeneratorParams& params,
                                               std::span<const double> z,
                                               Cache* cache) const {
  check(params, z.size());
  const int n_in = spec_.latent_dim, n_h = spec_.hidden;
  const int kk = spec_.kernel_size * spec_.kernel_size;
  const double* w1 = params.block("fc1.w").data();
  const double* b1 = params.block("fc1.b").data();
  std::vector<double> hidden(n_h);
  for (int j = 0; j < n_h; ++j) {
    double a = b1[j];
    for (int i = 0; i < n_in; ++i) a += w1[j * n_in + i] * z[i];
    hidden[j] = a > 0.0 ? a : std::expm1(a);
  }
  KernelGeneratorOutput out{std::vector<double>(kk), std::vector<double>(kk)};
  const double* wl = params.block("head_logits.w").data();
  const double* bl = params.block("head_logits.b").data();
  const double* ws = params.block("head_logstd.w").data();
  const double* bs = params.block("head_logstd.b").data();
  for (int o = 0; o < kk; ++o) {
    double a = bl[o], b = bs[o];
    for (int j = 0; j < n_h; ++j) {
      a += wl[o * n_h + j] * hidden[j];
      b += ws[o * n_h + j] * hidden[j];
    }
    out.logits[o] = a;
    out.log_std[o] = b;
  }
  if (cache) {
    cache->z.assign(z.begin(), z.end());
    cache->hidden = std::move(hidden);
  }
  return out;
}

void KernelGenerator::backward(const GeneratorParams& params, const Cache& c,
                               std::span<const double> d_logits,
                               std::span<const double> d_log_std,
                               std::span<double> grad) const {
  check(params, c.z.size());
  const int n_in = spec_.latent_dim, n_h = spec_.hidden;
  const std::size_t kk = static_cast<std::size_t>(spec_.kernel_size) * spec_.kernel_size;
  if (grad.size() != params.values.size() || d_logits.size() != kk ||
      d_log_std.size() != kk) {
    throw InvalidArgument("kernel generator: gradient buffer size mismatch");
  }
  auto g = [&](const char* name) { return grad.data() + arch_.block(name).offset; };
  const double* wl = params.block("head_logits.w").data();
  const double* ws = params.block("head_logstd.w").data();
  double* gwl = g("head_logits.w");
  double* gbl = g("head_logits.b");
  double* gws = g("head_logstd.w");
  double* gbs = g("head_logstd.b");
  std::vector<double> d_hidden(n_h, 0.0);
  for (std::size_t o = 0; o < kk; ++o) {
    gbl[o] += d_logits[o];
    gbs[o] += d_log_std[o];
    for (int j = 0; j < n_h; ++j) {
      gwl[o * n_h + j] += d_logits[o] * c.hidden[j];
      gws[o * n_h + j] += d_log_std[o] * c.hidden[j];
      d_hidden[j] += d_logits[o] * wl[o * n_h + j] + d_log_std[o] * ws[o * n_h + j];
    }
  }
  double* gw1 = g("fc1.w");
  double* gb1 = g("fc1.b");
  for (int j = 0; j < n_h; ++j) {
    const double y = c.hidden[j];
    const double d = d_hidden[j] * (y > 0.0 ? 1.0 : y + 1.0);
    gb1[j] += d;
    for (int i = 0; i < n_in; ++i) gw1[j * n_in + i] += d * c.z[i];
  }
}

// ---------------------------------------------------------------------------
// AdamOptimizer

AdamOptimizer::AdamOptimizer(std::size_t n, double learning_rate, double beta1,
                             double beta2, double epsilon)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(epsilon),
      m_(n, 0.0), v_(n, 0.0) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw InvalidArgument("adam: parameter/gradient size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
    const double mh = m_[i] / c1, vh = v_[i] / c2;
    params[i] -= lr_ * mh / (std::sqrt(vh) + eps_);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::string& path,
                     const std::vector<GeneratorParams>& sections) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write("TGVDCKPT", 8);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(sections.size()));
  for (const auto& s : sections) {
    s.validate();
    const std::string desc = s.arch.serialize();
    put_u32(os, static_cast<std::uint32_t>(desc.size()));
    os.write(desc.data(), static_cast<std::streamsize>(desc.size()));
    put_u64(os, s.values.size());
    for (double v : s.values) put_u64(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

std::vector<GeneratorParams> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::string(magic, 8) != "TGVDCKPT") {
    throw IoError("not a tgvdeconv checkpoint: " + path);
  }
  const auto version = static_cast<std::uint32_t>(get_le(is, 4));
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto n = static_cast<std::uint32_t>(get_le(is, 4));
  std::vector<GeneratorParams> out;
  for (std::uint32_t s = 0; s < n; ++s) {
    const auto len = static_cast<std::uint32_t>(get_le(is, 4));
    std::string desc(len, '\0');
    if (!is.read(desc.data(), len)) throw IoError("checkpoint: truncated descriptor");
    GeneratorParams p;
    p.arch = ArchitectureDescriptor::parse(desc);
    const std::uint64_t count = get_le(is, 8);
    if (count != p.arch.parameter_count()) {
      throw IoError("checkpoint: value count does not match descriptor");
    }
    p.values.resize(count);
    for (auto& v : p.values) v = std::bit_cast<double>(get_le(is, 8));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace tgvd::nn
