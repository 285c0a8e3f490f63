// SPDX-License-Identifier: Apache-2.0
#include "voxgen/train.hpp"

#include "voxgen/errors.hpp"

#include <cmath>
#include <string>

namespace voxgen {

void TrainHyper::validate() const {
  if (steps < 1) throw InvalidArgument("steps must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must lie in [0, 1)");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw InvalidArgument("ema_decay must lie in [0, 1)");
  if (grad_clip < 0.0) throw InvalidArgument("grad_clip must be >= 0");
  if (validation_size < 1) throw InvalidArgument("validation_size must be >= 1");
  if (validate_every < 1) throw InvalidArgument("validate_every must be >= 1");
}

VoxelGrid augmented_grid(const Molecule& m, const GridSpec& spec, const ElementSet& elements,
                         Rng& rng) {
  const Molecule centred = place_on_grid(m, Placement::Center);
  const Molecule moved = random_se3_augment(centred, rng);
  return voxelize(moved, spec, elements, {.placement = Placement::AsIs});
}

namespace {

double validation_loss(const ConvDenoiser& model, std::span<const std::vector<double>> clean,
                       std::span<const std::vector<double>> noisy) {
  double total = 0.0;
  for (std::size_t s = 0; s < clean.size(); ++s) {
    const auto out = model.apply(noisy[s]);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double e = out[i] - clean[s][i];
      total += e * e;
    }
  }
  return total / static_cast<double>(clean.size());
}

}  // namespace

TrainResult train_denoiser(std::span<const Molecule> dataset, const GridSpec& spec,
                           const ElementSet& elements, NoiseLevel noise, const TrainHyper& hyper,
                           Rng& rng) {
  if (dataset.empty()) throw InvalidArgument("training set is empty");
  hyper.validate();
  spec.validate();

  // Every augmented copy must stay on the grid: radius about the centroid
  // plus the largest shift has to fit in half the extent.
  const double half = 0.5 * spec.extent();
  const double max_shift = AugmentOptions{}.max_shift * std::sqrt(3.0);
  for (std::size_t n = 0; n < dataset.size(); ++n) {
    const Vec3 c = dataset[n].centroid();
    double r = 0.0;
    for (const auto& a : dataset[n].atoms) r = std::max(r, (a.position - c).norm());
    if (r + max_shift > half) {
      throw InvalidArgument("training molecule " + std::to_string(n) +
                            " does not fit the grid under augmentation");
    }
  }

  ConvArchitecture arch;
  arch.channels = spec.channels;
  arch.length = spec.length;
  arch.width = hyper.width;
  arch.residual_blocks = hyper.residual_blocks;
  arch.sigma = noise.sigma();
  arch.ema_decay = hyper.ema_decay;
  ConvDenoiser model(arch, rng);

  std::normal_distribution<double> gauss(0.0, noise.sigma());
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);

  std::vector<std::vector<double>> val_clean, val_noisy;
  for (int s = 0; s < hyper.validation_size; ++s) {
    auto g = augmented_grid(dataset[pick(rng)], spec, elements, rng);
    std::vector<double> y = g.values;
    for (auto& v : y) v += gauss(rng);
    val_clean.push_back(std::move(g.values));
    val_noisy.push_back(std::move(y));
  }

  TrainResult result{model, {}, {}, 0.0, noise.variance() * static_cast<double>(spec.size())};
  auto& params = model.mutable_params();
  ParamTensors velocity = params.weights;
  for (auto& t : velocity) std::fill(t.begin(), t.end(), 0.0);
  ParamTensors grad;

  std::vector<std::vector<double>> clean(hyper.batch_size), noisy(hyper.batch_size);
  for (long step = 0; step < hyper.steps; ++step) {
    for (int b = 0; b < hyper.batch_size; ++b) {
      auto g = augmented_grid(dataset[pick(rng)], spec, elements, rng);
      noisy[b] = g.values;
      for (auto& v : noisy[b]) v += gauss(rng);
      clean[b] = std::move(g.values);
    }
    const double loss = model.loss_and_gradient(noisy, clean, spec.length, grad);
    if (!std::isfinite(loss)) {
      throw TrainingFailure(step, "training diverged at step " + std::to_string(step));
    }
    result.loss_trace.push_back(loss);

    double scale = 1.0;
    if (hyper.grad_clip > 0.0) {
      double sq = 0.0;
      for (const auto& t : grad) {
        for (double v : t) sq += v * v;
      }
      const double norm = std::sqrt(sq);
      if (norm > hyper.grad_clip) scale = hyper.grad_clip / norm;
    }
    for (std::size_t t = 0; t < grad.size(); ++t) {
      for (std::size_t i = 0; i < grad[t].size(); ++i) {
        velocity[t][i] = hyper.momentum * velocity[t][i] - hyper.learning_rate * scale * grad[t][i];
        params.weights[t][i] += velocity[t][i];
      }
    }
    model.update_ema();

    if ((step + 1) % hyper.validate_every == 0 || step + 1 == hyper.steps) {
      const double v = validation_loss(model, val_clean, val_noisy);
      if (!std::isfinite(v)) {
        throw TrainingFailure(step, "validation loss is not finite at step " + std::to_string(step));
      }
      result.validation_trace.emplace_back(step + 1, v);
    }
  }
  result.validation_loss = result.validation_trace.back().second;
  result.model = std::move(model);
  return result;
}

}  // namespace voxgen
