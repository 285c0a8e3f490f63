// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include "voxgen/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>

using namespace voxgen;

namespace {

// Drops options that were never set (empty strings) so the record can be fed
// back through --config without tripping mutually exclusive flags.
std::string resolved_config(const std::string& full) {
  std::istringstream is(full);
  std::string line, out;
  while (std::getline(is, line)) {
    if (line.ends_with("=\"\"")) continue;
    out += line + '\n';
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxgen: voxel grids, walk-jump sampling and coordinate recovery for 3D molecules"};
  app.set_version_flag("--version", cli::kToolVersion);
  app.set_config("--config", "", "Key-value (TOML/INI) config file; command-line flags override it");
  app.require_subcommand(1);

  cli::CommonConfig common;
  app.add_option("--seed", common.seed, "Master seed")->required();
  app.add_option("--out", common.out, "Output directory")->required();
  app.add_option("--elements", common.elements, "Channel elements, in order")->capture_default_str();
  app.add_option("--length", common.length, "Grid edge in voxels")->capture_default_str();
  app.add_option("--resolution", common.resolution, "Angstrom per voxel")->capture_default_str();
  app.add_option("--atom-radius", common.atom_radius, "Atom radius in Angstrom")->capture_default_str();

  cli::VoxelizeConfig vox;
  auto* voxelize = app.add_subcommand("voxelize", "XYZ files -> grid files");
  voxelize->add_option("inputs", vox.inputs, "XYZ files or directories")->required();
  voxelize->add_flag("--clip", vox.clip, "Allow atoms outside the grid");

  cli::TrainConfig tr;
  auto* train = app.add_subcommand("train", "Train the convolutional denoiser");
  train->add_option("--dataset", tr.dataset, "Directory of XYZ files")->required();
  train->add_option("--sigma", tr.sigma)->capture_default_str();
  train->add_option("--steps", tr.hyper.steps)->capture_default_str();
  train->add_option("--batch-size", tr.hyper.batch_size)->capture_default_str();
  train->add_option("--learning-rate", tr.hyper.learning_rate)->capture_default_str();
  train->add_option("--momentum", tr.hyper.momentum)->capture_default_str();
  train->add_option("--ema-decay", tr.hyper.ema_decay)->capture_default_str();
  train->add_option("--grad-clip", tr.hyper.grad_clip)->capture_default_str();
  train->add_option("--width", tr.hyper.width)->capture_default_str();
  train->add_option("--blocks", tr.hyper.residual_blocks)->capture_default_str();
  train->add_option("--validation-size", tr.hyper.validation_size)->capture_default_str();
  train->add_option("--validate-every", tr.hyper.validate_every)->capture_default_str();

  cli::SampleConfig sm;
  auto* sample = app.add_subcommand("sample", "Walk-jump sampling");
  auto* ck = sample->add_option("--checkpoint", sm.checkpoint, "Trained denoiser checkpoint");
  auto* oracle = sample->add_option("--oracle", sm.oracle, "Gaussian-mixture oracle (JSON)");
  ck->excludes(oracle);
  sample->add_option("-n,--samples", sm.n_samples)->capture_default_str();
  sample->add_option("--delta", sm.params.delta)->capture_default_str();
  sample->add_option("--gamma", sm.params.gamma)->capture_default_str();
  sample->add_option("--u", sm.params.u, "Inverse mass")->capture_default_str();
  sample->add_option("--warmup", sm.params.warmup_steps)->capture_default_str();
  sample->add_option("--jump-every", sm.params.steps_between_jumps)->capture_default_str();
  sample->add_option("--max-steps", sm.params.max_steps_after_warmup)->capture_default_str();
  sample->add_option("--chains", sm.params.n_chains, "0 = min(samples, 64)")->capture_default_str();
  sample->add_flag("--reseed-on-divergence", sm.reseed_on_divergence);
  sample->add_option("--threads", sm.threads)->capture_default_str();

  cli::ExtractConfig ex;
  std::string optimizer = "gd";
  auto* extract = app.add_subcommand("extract", "Grid files -> XYZ files");
  extract->add_option("inputs", ex.inputs, "Grid files or directories")->required();
  extract->add_option("--threshold", ex.refine.threshold)->capture_default_str();
  extract->add_option("--max-iterations", ex.refine.max_iterations)->capture_default_str();
  extract->add_option("--tolerance", ex.refine.tolerance)->capture_default_str();
  extract->add_option("--optimizer", optimizer)->check(CLI::IsMember({"gd", "lbfgs"}))->capture_default_str();

  cli::EvalConfig ev;
  auto* eval = app.add_subcommand("eval", "Compare generated and reference XYZ sets");
  eval->add_option("--generated", ev.generated)->required();
  eval->add_option("--reference", ev.reference)->required();
  eval->add_option("--chem-config", ev.chem_config, "Covalent radius / valence overrides");

  for (auto* sub : {voxelize, train, sample, extract, eval}) sub->configurable();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  ex.refine.optimizer = optimizer == "lbfgs" ? RefineOptimizer::Lbfgs : RefineOptimizer::GradientDescent;

  try {
    std::string command;
    if (voxelize->parsed()) command = "voxelize";
    if (train->parsed()) command = "train";
    if (sample->parsed()) command = "sample";
    if (extract->parsed()) command = "extract";
    if (eval->parsed()) command = "eval";
    cli::write_manifest(common.out, command, common.seed,
                        resolved_config(app.config_to_str(true, false)));

    if (command == "voxelize") cli::cmd_voxelize(common, vox);
    if (command == "train") cli::cmd_train(common, tr);
    if (command == "sample") cli::cmd_sample(common, sm);
    if (command == "extract") cli::cmd_extract(common, ex);
    if (command == "eval") cli::cmd_eval(common, ev);
  } catch (const Error& e) {
    std::cerr << "voxgen: error: " << e.what() << '\n';
    return cli::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "voxgen: internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
