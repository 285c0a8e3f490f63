// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include "voxgen/chem.hpp"
#include "voxgen/conv_denoiser.hpp"
#include "voxgen/errors.hpp"
#include "voxgen/io.hpp"
#include "voxgen/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace voxgen::cli {

GridSpec CommonConfig::grid_spec() const {
  GridSpec s;
  s.length = length;
  s.resolution = resolution;
  s.atom_radius = atom_radius;
  s.channels = static_cast<int>(element_set().size());
  s.validate();
  return s;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::Config: return 2;
    case ErrorKind::Io:
    case ErrorKind::Parse:
    case ErrorKind::Format: return 3;
    case ErrorKind::Divergence: return 4;
    case ErrorKind::RefinementFailure: return 5;
    case ErrorKind::TrainingFailure: return 6;
    case ErrorKind::OutOfBounds: return 7;
    case ErrorKind::Generation: return 8;
  }
  return 1;
}

namespace {

void ensure_out(const std::string& out) {
  if (out.empty()) throw ConfigError("an output directory is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create '" + out + "': " + ec.message());
}

std::vector<std::string> expand(const std::vector<std::string>& inputs, const std::string& ext) {
  std::vector<std::string> files;
  for (const auto& in : inputs) {
    std::error_code ec;
    if (fs::is_directory(in, ec)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ext) found.push_back(e.path().string());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(in, ec)) {
      files.push_back(in);
    } else {
      throw IoError("input '" + in + "' does not exist");
    }
  }
  return files;
}

std::string stem_path(const std::string& out, const std::string& input, const std::string& ext) {
  return (fs::path(out) / fs::path(input).stem()).string() + ext;
}

std::vector<MolecularGraph> perceive_dir(const std::string& dir, const BondTable& bonds,
                                         const ValenceTable& valences) {
  std::vector<MolecularGraph> out;
  for (const auto& f : list_xyz_files(dir)) {
    out.push_back(perceive_bonds(read_xyz_file(f), bonds, valences));
  }
  if (out.empty()) throw IoError("no .xyz files in '" + dir + "'");
  return out;
}

}  // namespace

void write_manifest(const std::string& out, const std::string& command, std::uint64_t seed,
                    const std::string& resolved_config) {
  ensure_out(out);
  nlohmann::json m = {{"tool", "voxgen"},
                      {"version", kToolVersion},
                      {"command", command},
                      {"seed", seed},
                      {"config", resolved_config}};
  std::ofstream os(fs::path(out) / "manifest.json");
  if (!os) throw IoError("cannot write manifest in '" + out + "'");
  os << m.dump(2) << '\n';
}

void cmd_voxelize(const CommonConfig& common, const VoxelizeConfig& cfg) {
  ensure_out(common.out);
  const auto spec = common.grid_spec();
  const auto elements = common.element_set();
  VoxelizeOptions opts;
  opts.bounds = cfg.clip ? BoundsPolicy::Clip : BoundsPolicy::Error;
  for (const auto& f : expand(cfg.inputs, ".xyz")) {
    const auto grid = voxelize(read_xyz_file(f), spec, elements, opts);
    write_grid_file(stem_path(common.out, f, ".vxg"), grid);
  }
}

void cmd_train(const CommonConfig& common, const TrainConfig& cfg) {
  ensure_out(common.out);
  std::vector<Molecule> dataset;
  for (const auto& f : list_xyz_files(cfg.dataset)) dataset.push_back(read_xyz_file(f));
  if (dataset.empty()) throw IoError("no .xyz files in '" + cfg.dataset + "'");

  Rng rng = derive_rng(common.seed, 0);
  auto result = train_denoiser(dataset, common.grid_spec(), common.element_set(),
                               NoiseLevel(cfg.sigma), cfg.hyper, rng);
  save_checkpoint((fs::path(common.out) / "model.vxck").string(), result.model.params());

  std::ofstream loss(fs::path(common.out) / "loss.csv");
  loss << "step,loss\n";
  loss.precision(10);
  for (std::size_t s = 0; s < result.loss_trace.size(); ++s) loss << s << ',' << result.loss_trace[s] << '\n';
  std::ofstream val(fs::path(common.out) / "validation.csv");
  val << "step,validation_loss,identity_baseline\n";
  val.precision(10);
  for (const auto& [step, v] : result.validation_trace) {
    val << step << ',' << v << ',' << result.identity_baseline << '\n';
  }
}

GmmDenoiser load_oracle(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
    std::vector<GmmComponent> comps;
    for (const auto& c : j.at("components")) {
      comps.push_back({c.at("weight").get<double>(), c.at("mean").get<std::vector<double>>(),
                       c.value("tau", 0.0)});
    }
    return GmmDenoiser(GmmModel(std::move(comps)), NoiseLevel(j.at("sigma").get<double>()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad oracle file '" + path + "': " + e.what());
  }
}

void cmd_sample(const CommonConfig& common, const SampleConfig& cfg) {
  ensure_out(common.out);
  if (cfg.checkpoint.empty() == cfg.oracle.empty()) {
    throw ConfigError("sample needs exactly one of --checkpoint or --oracle");
  }
  WalkJumpOptions opts;
  opts.on_divergence = cfg.reseed_on_divergence ? DivergencePolicy::Reseed : DivergencePolicy::Error;
  opts.threads = cfg.threads;

  SampleRun run;
  if (!cfg.oracle.empty()) {
    const auto den = load_oracle(cfg.oracle);
    run = walk_jump_sample(den, cfg.params, cfg.n_samples, common.seed, opts);
    std::ofstream os(fs::path(common.out) / "samples.jsonl");
    for (const auto& s : run.samples) os << nlohmann::json(s).dump() << '\n';
  } else {
    ConvDenoiser den(load_checkpoint(cfg.checkpoint));
    GridSpec spec = common.grid_spec();
    spec.channels = den.params().arch.channels;
    spec.length = den.params().arch.length;
    if (static_cast<std::size_t>(spec.channels) != common.element_set().size()) {
      throw ConfigError("checkpoint has " + std::to_string(spec.channels) +
                        " channels but the element set has " +
                        std::to_string(common.element_set().size()));
    }
    run = walk_jump_sample(den, cfg.params, cfg.n_samples, common.seed, opts);
    for (std::size_t i = 0; i < run.samples.size(); ++i) {
      std::vector<double> v = run.samples[i];
      for (auto& x : v) x = std::clamp(x, 0.0, 1.0);
      char name[32];
      std::snprintf(name, sizeof name, "sample_%05zu.vxg", i);
      write_grid_file((fs::path(common.out) / name).string(), VoxelGrid(spec, std::move(v)));
    }
  }
  std::ofstream log(fs::path(common.out) / "jumps.jsonl");
  write_jump_log(log, run.jumps);
  nlohmann::json chains = nlohmann::json::array();
  for (const auto& c : run.chains) {
    chains.push_back({{"chain", c.chain},
                      {"total_steps", c.total_steps},
                      {"restarts", c.restarts},
                      {"divergences", c.divergences},
                      {"score_norm_trace", c.score_norm_trace}});
  }
  std::ofstream diag(fs::path(common.out) / "chains.json");
  diag << chains.dump(2) << '\n';
}

void cmd_extract(const CommonConfig& common, const ExtractConfig& cfg) {
  cfg.refine.validate();
  ensure_out(common.out);
  const auto elements = common.element_set();
  for (const auto& f : expand(cfg.inputs, ".vxg")) {
    const auto grid = read_grid_file(f);
    if (static_cast<std::size_t>(grid.spec.channels) != elements.size()) {
      throw ConfigError("grid '" + f + "' has " + std::to_string(grid.spec.channels) +
                        " channels but the element set has " + std::to_string(elements.size()));
    }
    const auto m = extract_molecule(grid, elements, cfg.refine);
    write_xyz_file(stem_path(common.out, f, ".xyz"), m, fs::path(f).filename().string());
  }
}

void cmd_eval(const CommonConfig& common, const EvalConfig& cfg) {
  ensure_out(common.out);
  BondTable bonds = BondTable::defaults();
  ValenceTable valences = ValenceTable::defaults();
  if (!cfg.chem_config.empty()) load_chem_tables_file(cfg.chem_config, bonds, valences);
  const auto gen = perceive_dir(cfg.generated, bonds, valences);
  const auto ref = perceive_dir(cfg.reference, bonds, valences);
  EvalOptions opts;
  opts.valences = valences;
  const auto doc = to_document(evaluate(gen, ref, opts));
  std::ofstream os(fs::path(common.out) / "eval.json");
  os << doc;
  if (!os) throw IoError("failed writing eval report");
  std::cout << doc;
}

}  // namespace voxgen::cli
