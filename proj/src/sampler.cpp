// SPDX-License-Identifier: Apache-2.0
#include "voxgen/sampler.hpp"

#include "voxgen/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>

namespace voxgen {

void SamplerParams::validate() const {
  for (double v : {delta, gamma, u}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidArgument("delta, gamma and u must be positive and finite");
    }
  }
  if (warmup_steps < 0 || steps_between_jumps < 0 || max_steps_after_warmup < 0) {
    throw InvalidArgument("step counts must be >= 0");
  }
  if (n_chains < 0) throw InvalidArgument("n_chains must be >= 0");
}

ChainState init_chain(std::size_t dim, NoiseLevel noise, Rng& rng) {
  std::normal_distribution<double> n(0.0, noise.sigma());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ChainState s;
  s.y.resize(dim);
  for (auto& y : s.y) {
    const double a = n(rng);
    y = a + unif(rng);
  }
  s.v.assign(dim, 0.0);
  return s;
}

namespace {

bool finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

double langevin_step(ChainState& s, const ScoreFn& score, const SamplerParams& p,
                     std::span<const double> eps) {
  const std::size_t d = s.y.size();
  if (s.v.size() != d || eps.size() != d) {
    throw InvalidArgument("position, velocity and noise must have the same size");
  }
  const double half = 0.5 * p.delta;
  const double friction = std::exp(-p.gamma * p.delta);
  const double kick = p.u * half;
  const double noise_scale = std::sqrt(p.u * (1.0 - std::exp(-2.0 * p.gamma * p.delta)));

  for (std::size_t i = 0; i < d; ++i) s.y[i] += half * s.v[i];
  const std::vector<double> g = score(s.y);
  if (g.size() != d) throw InvalidArgument("score changed the tensor size");
  double g2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double v = s.v[i] + kick * g[i];
    v = friction * v + kick * g[i] + noise_scale * eps[i];
    s.v[i] = v;
    s.y[i] += half * v;
    g2 += g[i] * g[i];
  }
  ++s.step;
  if (!finite(s.y) || !finite(s.v)) {
    throw DivergenceError(-1, s.step, "chain diverged at step " + std::to_string(s.step));
  }
  return std::sqrt(g2);
}

double langevin_step(ChainState& s, const ScoreFn& score, const SamplerParams& p, Rng& rng) {
  std::vector<double> eps(s.y.size());
  fill_normal(eps, rng);
  return langevin_step(s, score, p, eps);
}

ScoreFn denoiser_score(const Denoiser& den) {
  return [&den](std::span<const double> y) { return score_from_denoiser(den, y); };
}

std::vector<double> jump(std::span<const double> y, const Denoiser& den) {
  if (y.size() != den.dim()) {
    throw InvalidArgument("jump input has " + std::to_string(y.size()) +
                          " entries, denoiser expects " + std::to_string(den.dim()));
  }
  return den.apply(y);
}

namespace {

struct ChainOutput {
  std::vector<std::vector<double>> samples;
  std::vector<JumpRecord> jumps;
  ChainDiagnostics diag;
};

ChainOutput run_chain(const Denoiser& den, const SamplerParams& p, std::size_t quota,
                      std::uint64_t seed, int chain, DivergencePolicy policy) {
  ChainOutput out;
  out.diag.chain = chain;
  Rng rng = chain_rng(seed, chain);
  const ScoreFn score = denoiser_score(den);
  const NoiseLevel noise = den.noise();

  bool first = true;
  while (out.samples.size() < quota) {
    if (!first) ++out.diag.restarts;
    first = false;
    ChainState s = init_chain(den.dim(), noise, rng);
    try {
      for (long k = 0; k < p.warmup_steps; ++k) langevin_step(s, score, p, rng);
      double norm_sum = 0.0;
      long norm_count = 0;
      for (long k = 1; k <= p.max_steps_after_warmup && out.samples.size() < quota; ++k) {
        norm_sum += langevin_step(s, score, p, rng);
        ++norm_count;
        if (k % p.steps_between_jumps == 0) {
          const double mean_norm = norm_sum / static_cast<double>(norm_count);
          out.samples.push_back(jump(s.y, den));
          out.jumps.push_back({chain, s.step, mean_norm});
          out.diag.score_norm_trace.push_back(mean_norm);
          norm_sum = 0.0;
          norm_count = 0;
        }
      }
    } catch (const DivergenceError& e) {
      out.diag.total_steps += s.step;
      if (policy == DivergencePolicy::Error) {
        throw DivergenceError(chain, e.step(),
                              "chain " + std::to_string(chain) + " diverged at step " +
                                  std::to_string(e.step()));
      }
      ++out.diag.divergences;
      continue;
    }
    out.diag.total_steps += s.step;
  }
  return out;
}

}  // namespace

SampleRun walk_jump_sample(const Denoiser& den, const SamplerParams& p, std::size_t n_samples,
                           std::uint64_t seed, const WalkJumpOptions& opts) {
  p.validate();
  if (n_samples < 1) throw InvalidArgument("n_samples must be >= 1");
  if (p.steps_between_jumps < 1) throw InvalidArgument("steps_between_jumps must be >= 1");
  if (p.max_steps_after_warmup < p.steps_between_jumps) {
    throw InvalidArgument("max_steps_after_warmup is shorter than steps_between_jumps");
  }
  const std::size_t n_chains =
      p.n_chains > 0 ? static_cast<std::size_t>(p.n_chains) : std::min<std::size_t>(n_samples, 64);

  std::vector<std::size_t> quota(n_chains, n_samples / n_chains);
  for (std::size_t c = 0; c < n_samples % n_chains; ++c) ++quota[c];

  std::vector<ChainOutput> outputs(n_chains);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t c = next++; c < n_chains; c = next++) {
      try {
        outputs[c] = run_chain(den, p, quota[c], seed, static_cast<int>(c), opts.on_divergence);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(opts.threads, static_cast<int>(n_chains)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  SampleRun run;
  for (auto& o : outputs) {
    for (auto& s : o.samples) run.samples.push_back(std::move(s));
    run.jumps.insert(run.jumps.end(), o.jumps.begin(), o.jumps.end());
    run.chains.push_back(std::move(o.diag));
  }
  return run;
}

void write_jump_log(std::ostream& os, std::span<const JumpRecord> jumps) {
  for (const auto& j : jumps) {
    nlohmann::json rec = {{"chain", j.chain}, {"step", j.step}, {"mean_score_norm", j.mean_score_norm}};
    os << rec.dump() << '\n';
  }
}

}  // namespace voxgen
