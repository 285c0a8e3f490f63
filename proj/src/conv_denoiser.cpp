// SPDX-License-Identifier: Apache-2.0
#include "voxgen/conv_denoiser.hpp"

#include "binary_io.hpp"
#include "voxgen/errors.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace voxgen {

namespace {

constexpr int kTaps = 27;
// sigmoid(-3) ~ 0.05: the untrained model predicts a nearly empty grid
constexpr double kHeadBias = -3.0;

std::size_t cube(int n) { return static_cast<std::size_t>(n) * n * n; }

/// Copies a channel-major L^3 tensor into a zero-padded (L+2)^3 layout.
std::vector<double> pad(std::span<const double> in, int ch, int len) {
  const int p = len + 2;
  std::vector<double> out(static_cast<std::size_t>(ch) * cube(p), 0.0);
  for (int c = 0; c < ch; ++c) {
    for (int x = 0; x < len; ++x) {
      for (int y = 0; y < len; ++y) {
        const double* src = in.data() + ((static_cast<std::size_t>(c) * len + x) * len + y) * len;
        double* dst = out.data() + ((static_cast<std::size_t>(c) * p + x + 1) * p + y + 1) * p + 1;
        std::memcpy(dst, src, sizeof(double) * len);
      }
    }
  }
  return out;
}

// out[co] = b[co] + sum_ci w[co][ci] (*) in[ci]
void conv_forward(std::span<const double> in, int cin, std::span<const double> w,
                  std::span<const double> b, std::span<double> out, int cout, int len) {
  const auto padded = pad(in, cin, len);
  const int p = len + 2;
  const std::size_t vol = cube(len);
  for (int co = 0; co < cout; ++co) {
    double* o = out.data() + co * vol;
    std::fill(o, o + vol, b[co]);
    for (int ci = 0; ci < cin; ++ci) {
      const double* src = padded.data() + ci * cube(p);
      const double* wk = w.data() + (static_cast<std::size_t>(co) * cin + ci) * kTaps;
      for (int dx = 0; dx < 3; ++dx) {
        for (int dy = 0; dy < 3; ++dy) {
          const double w0 = wk[(dx * 3 + dy) * 3 + 0];
          const double w1 = wk[(dx * 3 + dy) * 3 + 1];
          const double w2 = wk[(dx * 3 + dy) * 3 + 2];
          for (int x = 0; x < len; ++x) {
            for (int y = 0; y < len; ++y) {
              const double* row = src + (static_cast<std::size_t>(x + dx) * p + y + dy) * p;
              double* orow = o + (static_cast<std::size_t>(x) * len + y) * len;
              for (int z = 0; z < len; ++z) {
                orow[z] += w0 * row[z] + w1 * row[z + 1] + w2 * row[z + 2];
              }
            }
          }
        }
      }
    }
  }
}

// Accumulates weight/bias gradients and, if grad_in is non-empty, the input
// gradient (overwritten).
void conv_backward(std::span<const double> in, int cin, std::span<const double> w,
                   std::span<const double> grad_out, int cout, int len,
                   std::span<double> grad_w, std::span<double> grad_b,
                   std::span<double> grad_in) {
  const int p = len + 2;
  const std::size_t vol = cube(len);
  const auto padded_in = pad(in, cin, len);
  for (int co = 0; co < cout; ++co) {
    const double* g = grad_out.data() + co * vol;
    double sb = 0.0;
    for (std::size_t i = 0; i < vol; ++i) sb += g[i];
    grad_b[co] += sb;
    for (int ci = 0; ci < cin; ++ci) {
      const double* src = padded_in.data() + ci * cube(p);
      double* gw = grad_w.data() + (static_cast<std::size_t>(co) * cin + ci) * kTaps;
      for (int dx = 0; dx < 3; ++dx) {
        for (int dy = 0; dy < 3; ++dy) {
          double s0 = 0.0, s1 = 0.0, s2 = 0.0;
          for (int x = 0; x < len; ++x) {
            for (int y = 0; y < len; ++y) {
              const double* row = src + (static_cast<std::size_t>(x + dx) * p + y + dy) * p;
              const double* grow = g + (static_cast<std::size_t>(x) * len + y) * len;
              for (int z = 0; z < len; ++z) {
                s0 += grow[z] * row[z];
                s1 += grow[z] * row[z + 1];
                s2 += grow[z] * row[z + 2];
              }
            }
          }
          gw[(dx * 3 + dy) * 3 + 0] += s0;
          gw[(dx * 3 + dy) * 3 + 1] += s1;
          gw[(dx * 3 + dy) * 3 + 2] += s2;
        }
      }
    }
  }
  if (grad_in.empty()) return;
  const auto padded_g = pad(grad_out, cout, len);
  std::fill(grad_in.begin(), grad_in.end(), 0.0);
  for (int ci = 0; ci < cin; ++ci) {
    double* gi = grad_in.data() + ci * vol;
    for (int co = 0; co < cout; ++co) {
      const double* src = padded_g.data() + co * cube(p);
      const double* wk = w.data() + (static_cast<std::size_t>(co) * cin + ci) * kTaps;
      for (int dx = 0; dx < 3; ++dx) {
        for (int dy = 0; dy < 3; ++dy) {
          const double w0 = wk[(dx * 3 + dy) * 3 + 0];
          const double w1 = wk[(dx * 3 + dy) * 3 + 1];
          const double w2 = wk[(dx * 3 + dy) * 3 + 2];
          for (int x = 0; x < len; ++x) {
            for (int y = 0; y < len; ++y) {
              const double* row =
                  src + (static_cast<std::size_t>(x + 2 - dx) * p + y + 2 - dy) * p;
              double* orow = gi + (static_cast<std::size_t>(x) * len + y) * len;
              for (int z = 0; z < len; ++z) {
                orow[z] += w0 * row[z + 2] + w1 * row[z + 1] + w2 * row[z];
              }
            }
          }
        }
      }
    }
  }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> silu(std::span<const double> h) {
  std::vector<double> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = h[i] * sigmoid(h[i]);
  return out;
}

// g <- g * silu'(h)
void silu_backward(std::span<const double> h, std::span<double> g) {
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double s = sigmoid(h[i]);
    g[i] *= s * (1.0 + h[i] * (1.0 - s));
  }
}

struct Cache {
  std::vector<std::vector<double>> h;  // h0 .. hB
  std::vector<std::vector<double>> a;  // silu(h0) .. silu(hB)
};

std::vector<double> forward(const ConvArchitecture& arch, const ParamTensors& w,
                            std::span<const double> y, int len, Cache* cache) {
  const std::size_t vol = cube(len);
  const int width = arch.width;
  const int nb = arch.residual_blocks;
  std::vector<double> h(width * vol);
  conv_forward(y, arch.channels, w[0], w[1], h, width, len);
  std::vector<double> tmp(width * vol);
  for (int b = 0; b < nb; ++b) {
    auto a = silu(h);
    conv_forward(a, width, w[2 + 2 * b], w[3 + 2 * b], tmp, width, len);
    if (cache) {
      cache->h.push_back(h);
      cache->a.push_back(std::move(a));
    }
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += tmp[i];
  }
  auto a = silu(h);
  std::vector<double> out(arch.channels * vol);
  conv_forward(a, width, w[2 + 2 * nb], w[3 + 2 * nb], out, arch.channels, len);
  for (auto& v : out) v = 1.0 / (1.0 + std::exp(-v));
  if (cache) {
    cache->h.push_back(std::move(h));
    cache->a.push_back(std::move(a));
  }
  return out;
}

void check_len(std::span<const double> y, int channels, int len) {
  if (len < 1 || y.size() != static_cast<std::size_t>(channels) * cube(len)) {
    throw InvalidArgument("input has " + std::to_string(y.size()) + " values, expected " +
                          std::to_string(channels) + " x " + std::to_string(len) + "^3");
  }
}

}  // namespace

void ConvArchitecture::validate() const {
  if (channels < 1) throw InvalidArgument("denoiser needs at least one channel");
  if (length < 1) throw InvalidArgument("denoiser grid length must be positive");
  if (width < 1) throw InvalidArgument("denoiser width must be positive");
  if (residual_blocks < 0) throw InvalidArgument("residual block count must be >= 0");
  NoiseLevel check(sigma);
  (void)check;
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) {
    throw InvalidArgument("ema_decay must lie in [0, 1)");
  }
}

std::vector<std::size_t> ConvArchitecture::tensor_sizes() const {
  std::vector<std::size_t> s;
  s.push_back(static_cast<std::size_t>(width) * channels * kTaps);
  s.push_back(width);
  for (int b = 0; b < residual_blocks; ++b) {
    s.push_back(static_cast<std::size_t>(width) * width * kTaps);
    s.push_back(width);
  }
  s.push_back(static_cast<std::size_t>(channels) * width * kTaps);
  s.push_back(channels);
  return s;
}

std::vector<std::string> ConvArchitecture::tensor_names() const {
  std::vector<std::string> n{"stem.weight", "stem.bias"};
  for (int b = 0; b < residual_blocks; ++b) {
    n.push_back("block" + std::to_string(b) + ".weight");
    n.push_back("block" + std::to_string(b) + ".bias");
  }
  n.push_back("head.weight");
  n.push_back("head.bias");
  return n;
}

std::string ConvArchitecture::to_text() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "model=conv-residual\n"
     << "kernel=3\n"
     << "activation=silu\n"
     << "output=sigmoid\n"
     << "channels=" << channels << '\n'
     << "length=" << length << '\n'
     << "width=" << width << '\n'
     << "residual_blocks=" << residual_blocks << '\n'
     << "sigma=" << sigma << '\n'
     << "ema_decay=" << ema_decay << '\n';
  return os.str();
}

ConvArchitecture ConvArchitecture::from_text(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("bad architecture line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw FormatError("architecture is missing '" + k + "'");
    return it->second;
  };
  if (need("model") != "conv-residual" || need("kernel") != "3" || need("activation") != "silu" ||
      need("output") != "sigmoid") {
    throw FormatError("unsupported architecture");
  }
  ConvArchitecture a;
  try {
    a.channels = std::stoi(need("channels"));
    a.length = std::stoi(need("length"));
    a.width = std::stoi(need("width"));
    a.residual_blocks = std::stoi(need("residual_blocks"));
    a.sigma = std::stod(need("sigma"));
    a.ema_decay = std::stod(need("ema_decay"));
  } catch (const std::logic_error&) {
    throw FormatError("architecture has a malformed number");
  }
  a.validate();
  return a;
}

void ConvDenoiserParams::validate() const {
  arch.validate();
  const auto sizes = arch.tensor_sizes();
  auto check = [&](const ParamTensors& t, const char* what) {
    if (t.size() != sizes.size()) {
      throw InvalidArgument(std::string(what) + " has the wrong number of tensors");
    }
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (t[i].size() != sizes[i]) {
        throw InvalidArgument(std::string(what) + " tensor " + std::to_string(i) +
                              " has the wrong size");
      }
    }
  };
  check(weights, "weights");
  check(ema, "EMA shadow");
}

ConvDenoiser::ConvDenoiser(const ConvArchitecture& arch, Rng& rng) {
  arch.validate();
  params_.arch = arch;
  const auto sizes = arch.tensor_sizes();
  params_.weights.resize(sizes.size());
  const int nb = arch.residual_blocks;
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    params_.weights[t].assign(sizes[t], 0.0);
    const bool is_head = t == static_cast<std::size_t>(2 + 2 * nb);
    if (t % 2 == 1) {
      if (t == static_cast<std::size_t>(3 + 2 * nb)) params_.weights[t].assign(sizes[t], kHeadBias);
      continue;
    }
    const bool is_block = t >= 2 && !is_head;
    const int fan_in = (t == 0 ? arch.channels : arch.width) * kTaps;
    double stddev = std::sqrt(2.0 / fan_in);
    if (is_block) stddev *= 0.5;
    if (is_head) stddev *= 0.05;
    std::normal_distribution<double> n(0.0, stddev);
    for (auto& v : params_.weights[t]) v = n(rng);
  }
  params_.ema = params_.weights;
}

ConvDenoiser::ConvDenoiser(ConvDenoiserParams params) : params_(std::move(params)) {
  params_.validate();
}

std::size_t ConvDenoiser::dim() const {
  return static_cast<std::size_t>(params_.arch.channels) * cube(params_.arch.length);
}

std::vector<double> ConvDenoiser::apply(std::span<const double> y) const {
  return apply_grid(y, params_.arch.length);
}

std::vector<double> ConvDenoiser::apply_grid(std::span<const double> y, int length) const {
  return apply_grid(y, length, use_ema_ ? params_.ema : params_.weights);
}

std::vector<double> ConvDenoiser::apply_grid(std::span<const double> y, int length,
                                             const ParamTensors& weights) const {
  check_len(y, params_.arch.channels, length);
  return forward(params_.arch, weights, y, length, nullptr);
}

double ConvDenoiser::loss_and_gradient(std::span<const std::vector<double>> noisy,
                                       std::span<const std::vector<double>> clean, int length,
                                       ParamTensors& grad) const {
  if (noisy.empty() || noisy.size() != clean.size()) {
    throw InvalidArgument("loss needs equally sized, non-empty noisy/clean batches");
  }
  const auto& arch = params_.arch;
  const auto& w = params_.weights;
  const auto sizes = arch.tensor_sizes();
  grad.resize(sizes.size());
  for (std::size_t t = 0; t < sizes.size(); ++t) grad[t].assign(sizes[t], 0.0);

  const std::size_t vol = cube(length);
  const int nb = arch.residual_blocks;
  const int width = arch.width;
  const double inv_b = 1.0 / static_cast<double>(noisy.size());
  double loss = 0.0;

  std::vector<double> g_a(width * vol);
  for (std::size_t s = 0; s < noisy.size(); ++s) {
    check_len(noisy[s], arch.channels, length);
    check_len(clean[s], arch.channels, length);
    Cache cache;
    const auto out = forward(arch, w, noisy[s], length, &cache);
    std::vector<double> g_out(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double e = out[i] - clean[s][i];
      loss += e * e;
      g_out[i] = 2.0 * e * inv_b * out[i] * (1.0 - out[i]);
    }
    const std::size_t head = 2 + 2 * nb;
    conv_backward(cache.a[nb], width, w[head], g_out, arch.channels, length, grad[head],
                  grad[head + 1], g_a);
    std::vector<double> g_h = g_a;
    silu_backward(cache.h[nb], g_h);
    for (int b = nb - 1; b >= 0; --b) {
      conv_backward(cache.a[b], width, w[2 + 2 * b], g_h, width, length, grad[2 + 2 * b],
                    grad[3 + 2 * b], g_a);
      silu_backward(cache.h[b], g_a);
      for (std::size_t i = 0; i < g_h.size(); ++i) g_h[i] += g_a[i];
    }
    conv_backward(noisy[s], arch.channels, w[0], g_h, width, length, grad[0], grad[1], {});
  }
  return loss * inv_b;
}

void ConvDenoiser::update_ema() {
  const double d = params_.arch.ema_decay;
  for (std::size_t t = 0; t < params_.weights.size(); ++t) {
    auto& s = params_.ema[t];
    const auto& p = params_.weights[t];
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = d * s[i] + (1.0 - d) * p[i];
  }
}

namespace {
constexpr char kCheckpointMagic[4] = {'V', 'X', 'C', 'K'};
}

void write_checkpoint(std::ostream& os, const ConvDenoiserParams& params) {
  params.validate();
  os.write(kCheckpointMagic, 4);
  detail::put_le<std::uint32_t>(os, kCheckpointVersion);
  const std::string text = params.arch.to_text();
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto* set : {&params.weights, &params.ema}) {
    for (const auto& t : *set) {
      for (double v : t) detail::put_f32(os, static_cast<float>(v));
    }
  }
  if (!os) throw IoError("failed writing checkpoint");
}

ConvDenoiserParams read_checkpoint(std::istream& is) {
  detail::LeReader r(is, "checkpoint");
  char magic[4];
  r.read_raw(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const auto n = r.get<std::uint32_t>();
  if (n > (1u << 20)) throw FormatError("architecture text is implausibly long");
  std::string text(n, '\0');
  r.read_raw(text.data(), n);
  ConvDenoiserParams p;
  p.arch = ConvArchitecture::from_text(text);
  const auto sizes = p.arch.tensor_sizes();
  for (auto* set : {&p.weights, &p.ema}) {
    set->resize(sizes.size());
    for (std::size_t t = 0; t < sizes.size(); ++t) {
      (*set)[t].resize(sizes[t]);
      for (auto& v : (*set)[t]) v = r.get_f32();
    }
  }
  p.validate();
  return p;
}

void save_checkpoint(const std::string& path, const ConvDenoiserParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_checkpoint(os, params);
}

ConvDenoiserParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_checkpoint(is);
}

}  // namespace voxgen
