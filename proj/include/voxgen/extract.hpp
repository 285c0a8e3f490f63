// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxgen/grid.hpp"
#include "voxgen/molecule.hpp"

#include <array>
#include <span>
#include <vector>

namespace voxgen {

struct Peak {
  int channel;
  std::array<int, 3> voxel;
  double value;

  bool operator==(const Peak&) const = default;
};

struct PeakSet {
  std::vector<Peak> peaks;

  std::size_t size() const noexcept { return peaks.size(); }
  bool empty() const noexcept { return peaks.empty(); }
};

enum class RefineOptimizer {
  GradientDescent,  // backtracking line search
  Lbfgs,
};

struct RefineConfig {
  double threshold = 0.1;
  int max_iterations = 200;
  /// Stop once the relative decrease of the reconstruction error falls below this.
  double tolerance = 1e-8;
  RefineOptimizer optimizer = RefineOptimizer::GradientDescent;
  /// Same-channel atoms closer than this many voxels after refinement are merged.
  double merge_distance_voxels = 0.5;
  /// Must match the kernel the target was produced with.
  KernelCutoff cutoff = KernelCutoff::Truncated;

  void validate() const;
};

/// Zeroes voxels below the threshold, then keeps every non-zero voxel equal to
/// the maximum of its (boundary-truncated) 3x3x3 neighbourhood in its channel.
/// A connected plateau of such maxima yields one peak, at its
/// lexicographically smallest voxel. Peaks are ordered by (channel, i, j, k).
PeakSet detect_peaks(const VoxelGrid& grid, const RefineConfig& cfg);

/// |voxelize(atoms) - target|^2 as a function of atom coordinates, with its
/// analytic gradient. Atoms are placed as-is on the target's grid.
class ReconstructionObjective {
 public:
  ReconstructionObjective(const VoxelGrid& target, std::vector<int> channels,
                          KernelCutoff cutoff = KernelCutoff::Truncated);

  std::size_t atoms() const noexcept { return channels_.size(); }
  /// `coords` is packed x0,y0,z0,x1,...; `grad` may be empty.
  double evaluate(std::span<const double> coords, std::span<double> grad) const;

 private:
  const VoxelGrid& target_;
  std::vector<int> channels_;
  KernelCutoff cutoff_;
  double target_sq_ = 0.0;
  mutable std::vector<double> q_;
  mutable std::vector<unsigned> mark_;
  mutable unsigned epoch_ = 0;
};

struct RefineResult {
  Molecule molecule;
  double initial_error = 0.0;
  double final_error = 0.0;
  int iterations = 0;
  /// Error after every accepted iteration, starting with the initial error.
  std::vector<double> error_trace;
};

/// One atom per peak, started at its voxel centre, positions optimised against
/// the target grid; atom count and elements stay fixed. Same-channel atoms that
/// end up closer than cfg.merge_distance_voxels are then merged to their mean.
RefineResult refine_coordinates(const PeakSet& peaks, const VoxelGrid& target,
                                const ElementSet& elements, const RefineConfig& cfg);

/// detect_peaks followed by refine_coordinates.
Molecule extract_molecule(const VoxelGrid& grid, const ElementSet& elements,
                          const RefineConfig& cfg = {});

}  // namespace voxgen
