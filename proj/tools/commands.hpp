// SPDX-License-Identifier: Apache-2.0
// Pipeline commands behind the voxgen CLI. Each writes into cfg.out and is a
// deterministic function of its inputs, its resolved configuration and seed.
#pragma once

#include "voxgen/errors.hpp"
#include "voxgen/extract.hpp"
#include "voxgen/grid.hpp"
#include "voxgen/sampler.hpp"
#include "voxgen/train.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace voxgen::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct CommonConfig {
  std::uint64_t seed = 0;
  std::string out;
  std::string elements = "C,H,O,N,F";
  int length = 32;
  double resolution = 0.25;
  double atom_radius = 0.5;

  ElementSet element_set() const { return ElementSet::parse(elements); }
  GridSpec grid_spec() const;
};

struct VoxelizeConfig {
  std::vector<std::string> inputs;  // .xyz files or directories
  bool clip = false;
};

struct TrainConfig {
  std::string dataset;  // directory of .xyz files
  double sigma = 0.9;
  TrainHyper hyper;
};

struct SampleConfig {
  std::string checkpoint;  // trained denoiser, or
  std::string oracle;      // JSON Gaussian-mixture description
  std::size_t n_samples = 1;
  SamplerParams params;
  bool reseed_on_divergence = false;
  int threads = 1;
};

struct ExtractConfig {
  std::vector<std::string> inputs;  // grid files or directories
  RefineConfig refine;
};

struct EvalConfig {
  std::string generated;
  std::string reference;
  std::string chem_config;  // optional table overrides
};

void cmd_voxelize(const CommonConfig& common, const VoxelizeConfig& cfg);
void cmd_train(const CommonConfig& common, const TrainConfig& cfg);
void cmd_sample(const CommonConfig& common, const SampleConfig& cfg);
void cmd_extract(const CommonConfig& common, const ExtractConfig& cfg);
void cmd_eval(const CommonConfig& common, const EvalConfig& cfg);

/// out/manifest.json: tool, version, command, seed and the resolved config.
void write_manifest(const std::string& out, const std::string& command, std::uint64_t seed,
                    const std::string& resolved_config);

/// {"sigma": s, "components": [{"weight": w, "mean": [...], "tau": t}, ...]}
GmmDenoiser load_oracle(const std::string& path);

/// Process exit code for a library error category.
int exit_code(ErrorKind kind);

}  // namespace voxgen::cli
