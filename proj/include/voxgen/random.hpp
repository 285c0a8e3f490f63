// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace voxgen {

using Rng = std::mt19937_64;

/// Independent stream for one consumer (chain, worker, ...) of a master seed.
/// Depends only on (master_seed, stream), never on scheduling.
inline Rng derive_rng(std::uint64_t master_seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
  return Rng(seq);
}

inline void fill_normal(std::span<double> out, Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> n(0.0, stddev);
  for (auto& x : out) x = n(rng);
}

}  // namespace voxgen
