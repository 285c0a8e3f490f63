// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxgen/denoise.hpp"
#include "voxgen/random.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace voxgen {

struct SamplerParams {
  double delta = 0.5;  // step size
  double gamma = 1.0;  // friction
  double u = 1.0;      // inverse mass
  long warmup_steps = 1000;
  long steps_between_jumps = 500;
  long max_steps_after_warmup = 1000;
  /// 0 picks min(n_samples, 64).
  int n_chains = 0;

  void validate() const;
};

struct ChainState {
  std::vector<double> y;  // position (noisy sample)
  std::vector<double> v;  // velocity
  long step = 0;
};

using ScoreFn = std::function<std::vector<double>(std::span<const double>)>;

/// y0 = N(0, sigma^2 I) + U(0, 1), v0 = 0.
ChainState init_chain(std::size_t dim, NoiseLevel noise, Rng& rng);

/// One step of the splitting scheme
///   y <- y + delta/2 v;  g <- score(y);  v <- v + u delta/2 g
///   v <- exp(-gamma delta) v + u delta/2 g + sqrt(u (1 - exp(-2 gamma delta))) eps
///   y <- y + delta/2 v
/// with caller-supplied standard normal `eps`. Exactly one score evaluation.
/// Returns |g|. Throws DivergenceError (chain -1) on a non-finite state.
double langevin_step(ChainState& state, const ScoreFn& score, const SamplerParams& p,
                     std::span<const double> eps);
/// Same, drawing eps from `rng`.
double langevin_step(ChainState& state, const ScoreFn& score, const SamplerParams& p, Rng& rng);

ScoreFn denoiser_score(const Denoiser& den);

/// Clean estimate xhat(y) = y + sigma^2 g(y), evaluated as den.apply(y).
std::vector<double> jump(std::span<const double> y, const Denoiser& den);

enum class DivergencePolicy { Error, Reseed };

struct WalkJumpOptions {
  DivergencePolicy on_divergence = DivergencePolicy::Error;
  /// Worker threads; results do not depend on this.
  int threads = 1;
};

struct JumpRecord {
  int chain;
  long step;  // chain step at which the jump was taken
  double mean_score_norm;  // mean |g| over the walk steps since the previous jump
};

struct ChainDiagnostics {
  int chain = 0;
  long total_steps = 0;
  long restarts = 0;      // fresh inits after exhausting max_steps_after_warmup
  long divergences = 0;   // only non-zero under DivergencePolicy::Reseed
  std::vector<double> score_norm_trace;  // one entry per jump
};

struct SampleRun {
  std::vector<std::vector<double>> samples;  // chain-major order
  std::vector<JumpRecord> jumps;             // parallel to samples
  std::vector<ChainDiagnostics> chains;
};

/// Per-chain RNG stream used by walk_jump_sample.
inline Rng chain_rng(std::uint64_t seed, int chain) {
  return derive_rng(seed, static_cast<std::uint64_t>(chain));
}

/// Walk-jump sampling. Chain c draws its quota of samples (n / n_chains,
/// remainder to the lowest chain ids) by warming up, then jumping every
/// steps_between_jumps walk steps; a chain that reaches
/// max_steps_after_warmup is restarted from a fresh init.
SampleRun walk_jump_sample(const Denoiser& den, const SamplerParams& p, std::size_t n_samples,
                           std::uint64_t seed, const WalkJumpOptions& opts = {});

/// One JSON object per line: {"chain":..,"step":..,"mean_score_norm":..}.
void write_jump_log(std::ostream& os, std::span<const JumpRecord> jumps);

}  // namespace voxgen
