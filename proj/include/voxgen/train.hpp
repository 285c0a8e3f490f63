// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxgen/conv_denoiser.hpp"
#include "voxgen/grid.hpp"

#include <functional>
#include <span>
#include <vector>

namespace voxgen {

struct TrainHyper {
  long steps = 2000;
  int batch_size = 4;
  double learning_rate = 2e-5;
  double momentum = 0.9;
  double ema_decay = 0.999;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;
  int width = 8;
  int residual_blocks = 2;
  int validation_size = 8;
  /// Validation loss is recorded every this many steps (and at the end).
  long validate_every = 500;

  void validate() const;
};

struct TrainResult {
  ConvDenoiser model;
  std::vector<double> loss_trace;  // batch loss per step
  std::vector<std::pair<long, double>> validation_trace;
  double validation_loss = 0.0;    // final, EMA weights
  double identity_baseline = 0.0;  // sigma^2 * d
};

/// Centres, randomly rotates/shifts and voxelizes one training molecule.
VoxelGrid augmented_grid(const Molecule& m, const GridSpec& spec, const ElementSet& elements,
                         Rng& rng);

/// SGD (with momentum) on the denoising loss over freshly augmented batches,
/// with an EMA shadow updated after every step. Validation uses the EMA
/// weights on a fixed set of augmented, noised grids.
/// Throws TrainingFailure when the loss stops being finite.
TrainResult train_denoiser(std::span<const Molecule> dataset, const GridSpec& spec,
                           const ElementSet& elements, NoiseLevel noise, const TrainHyper& hyper,
                           Rng& rng);

}  // namespace voxgen
