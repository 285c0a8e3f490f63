// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxgen/molecule.hpp"
#include "voxgen/random.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace voxgen {

/// Gaussian width factor of the per-atom occupancy kernel.
inline constexpr double kKernelWidthFactor = 0.93;
/// Truncation radius of the kernel in units of the atom radius.
/// exp(-(4 / 0.93)^2) ~ 9e-9.
inline constexpr double kKernelCutoffRadii = 4.0;

struct GridSpec {
  int length = 32;
  double resolution = 0.25;  // Angstrom per voxel
  int channels = 1;
  double atom_radius = 0.5;  // Angstrom, shared by all elements

  /// Throws InvalidArgument when the geometry is unusable.
  void validate() const;

  double extent() const { return length * resolution; }
  /// Corner of voxel (0,0,0). The grid is centred on the coordinate origin.
  double origin() const { return -0.5 * extent(); }
  std::size_t voxels() const {
    return static_cast<std::size_t>(length) * length * length;
  }
  std::size_t size() const { return static_cast<std::size_t>(channels) * voxels(); }
  std::size_t index(int c, int i, int j, int k) const {
    return ((static_cast<std::size_t>(c) * length + i) * length + j) * length + k;
  }
  /// Physical centre of voxel (i,j,k): origin + (idx + 0.5) * resolution.
  Vec3 voxel_center(int i, int j, int k) const {
    return {origin() + (i + 0.5) * resolution, origin() + (j + 0.5) * resolution,
            origin() + (k + 0.5) * resolution};
  }
  bool contains(const Vec3& p) const;

  bool operator==(const GridSpec&) const = default;
};

/// Channel-major occupancy tensor, shape channels x length^3.
struct VoxelGrid {
  GridSpec spec;
  std::vector<double> values;

  VoxelGrid() = default;
  explicit VoxelGrid(const GridSpec& s) : spec(s), values(s.size(), 0.0) {}
  VoxelGrid(const GridSpec& s, std::vector<double> v);

  double& at(int c, int i, int j, int k) { return values[spec.index(c, i, j, k)]; }
  double at(int c, int i, int j, int k) const { return values[spec.index(c, i, j, k)]; }
};

enum class Placement {
  Center,  // translate the centroid onto the grid centre
  AsIs,    // use coordinates unchanged
};

enum class BoundsPolicy {
  Error,  // atom centre outside the grid is an OutOfBoundsError
  Clip,   // keep whatever part of its density falls inside the grid
};

enum class KernelCutoff { Truncated, Exact };

struct VoxelizeOptions {
  Placement placement = Placement::Center;
  BoundsPolicy bounds = BoundsPolicy::Error;
  KernelCutoff cutoff = KernelCutoff::Truncated;
};

/// Fraction of volume occupied by an atom of radius r_a at distance d.
double atom_contribution(double d, double r_a);

/// Squared Gaussian width (0.93 r_a)^2 of the kernel.
inline double kernel_width_sq(double r_a) {
  const double s = kKernelWidthFactor * r_a;
  return s * s;
}

/// Molecule as it will be placed on the grid under the given policy.
Molecule place_on_grid(const Molecule& m, Placement placement);

/// Occ = 1 - prod_n (1 - V(|C - x_n|, r_a)) per channel. Throws
/// InvalidArgument for elements without a channel and OutOfBoundsError for
/// atoms outside the grid (unless clipping is requested).
VoxelGrid voxelize(const Molecule& m, const GridSpec& spec, const ElementSet& elements,
                   const VoxelizeOptions& opts = {});

/// Rotation R = Rz(alpha) * Ry(beta) * Rx(gamma).
Eigen::Matrix3d euler_rotation(double alpha, double beta, double gamma);

/// Rotates about the centroid, then translates by `shift`.
Molecule apply_rigid_transform(const Molecule& m, const Eigen::Matrix3d& rotation,
                               const Vec3& shift);

struct AugmentOptions {
  double max_shift = 0.25;  // Angstrom, per axis
};

/// Euler angles drawn uniformly in [0, 2pi) and a per-axis shift uniform in
/// [0, max_shift]. Uniform Euler angles are not Haar-uniform on SO(3); this is
/// the intended augmentation, not an approximation of a uniform rotation.
Molecule random_se3_augment(const Molecule& m, Rng& rng, const AugmentOptions& opts = {});

}  // namespace voxgen
