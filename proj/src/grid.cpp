// SPDX-License-Identifier: Apache-2.0
#include "voxgen/grid.hpp"

#include "voxgen/errors.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace voxgen {

void GridSpec::validate() const {
  if (length < 4) throw InvalidArgument("grid length must be >= 4, got " + std::to_string(length));
  if (!(resolution > 0.0) || !std::isfinite(resolution)) {
    throw InvalidArgument("grid resolution must be positive and finite");
  }
  if (channels < 1) throw InvalidArgument("grid needs at least one channel");
  if (!(atom_radius > 0.0) || !std::isfinite(atom_radius)) {
    throw InvalidArgument("atom radius must be positive and finite");
  }
}

bool GridSpec::contains(const Vec3& p) const {
  const double lo = origin();
  const double hi = origin() + extent();
  for (int a = 0; a < 3; ++a) {
    if (!(p[a] >= lo && p[a] <= hi)) return false;
  }
  return true;
}

VoxelGrid::VoxelGrid(const GridSpec& s, std::vector<double> v) : spec(s), values(std::move(v)) {
  if (values.size() != spec.size()) {
    throw InvalidArgument("grid payload has " + std::to_string(values.size()) +
                          " values, spec needs " + std::to_string(spec.size()));
  }
}

double atom_contribution(double d, double r_a) {
  if (!std::isfinite(r_a) || r_a <= 0.0) {
    throw InvalidArgument("atom radius must be positive and finite");
  }
  if (!std::isfinite(d) || d < 0.0) throw InvalidArgument("distance must be finite and >= 0");
  return std::exp(-(d * d) / kernel_width_sq(r_a));
}

Molecule place_on_grid(const Molecule& m, Placement placement) {
  if (placement == Placement::AsIs || m.empty()) return m;
  return m.translated(-m.centroid());
}

namespace {

struct AxisRange {
  int lo;
  int hi;  // inclusive; lo > hi means empty
};

AxisRange voxel_range(double p, double cutoff, const GridSpec& spec) {
  const double o = spec.origin();
  const double res = spec.resolution;
  int lo = static_cast<int>(std::ceil((p - cutoff - o) / res - 0.5));
  int hi = static_cast<int>(std::floor((p + cutoff - o) / res - 0.5));
  lo = std::max(lo, 0);
  hi = std::min(hi, spec.length - 1);
  return {lo, hi};
}

}  // namespace

VoxelGrid voxelize(const Molecule& m, const GridSpec& spec, const ElementSet& elements,
                   const VoxelizeOptions& opts) {
  spec.validate();
  if (static_cast<std::size_t>(spec.channels) != elements.size()) {
    throw InvalidArgument("grid has " + std::to_string(spec.channels) +
                          " channels but element set has " + std::to_string(elements.size()));
  }
  if (!m.all_finite()) throw InvalidArgument("molecule has non-finite coordinates");

  const Molecule placed = place_on_grid(m, opts.placement);
  std::vector<int> channel(placed.size());
  for (std::size_t n = 0; n < placed.size(); ++n) {
    const auto& a = placed.atoms[n];
    auto c = elements.channel_of(a.element);
    if (!c) {
      throw InvalidArgument("atom " + std::to_string(n) + " has element " +
                            std::string(symbol(a.element)) + " with no grid channel");
    }
    channel[n] = static_cast<int>(*c);
    if (opts.bounds == BoundsPolicy::Error && !spec.contains(a.position)) {
      throw OutOfBoundsError(n, "atom " + std::to_string(n) + " lies outside the grid extent");
    }
  }

  // Complement product Q = prod (1 - V); occupancy is 1 - Q.
  std::vector<double> q(spec.size(), 1.0);
  const double w2 = kernel_width_sq(spec.atom_radius);
  const bool exact = opts.cutoff == KernelCutoff::Exact;
  const double cutoff = kKernelCutoffRadii * spec.atom_radius;
  const double cutoff2 = cutoff * cutoff;
  const int len = spec.length;

  for (std::size_t n = 0; n < placed.size(); ++n) {
    const Vec3& p = placed.atoms[n].position;
    AxisRange rx{0, len - 1}, ry{0, len - 1}, rz{0, len - 1};
    if (!exact) {
      rx = voxel_range(p.x(), cutoff, spec);
      ry = voxel_range(p.y(), cutoff, spec);
      rz = voxel_range(p.z(), cutoff, spec);
    }
    for (int i = rx.lo; i <= rx.hi; ++i) {
      for (int j = ry.lo; j <= ry.hi; ++j) {
        for (int k = rz.lo; k <= rz.hi; ++k) {
          const Vec3 c = spec.voxel_center(i, j, k);
          const double dx = c.x() - p.x();
          const double dy = c.y() - p.y();
          const double dz = c.z() - p.z();
          const double d2 = dx * dx + dy * dy + dz * dz;
          if (!exact && d2 > cutoff2) continue;
          q[spec.index(channel[n], i, j, k)] *= 1.0 - std::exp(-d2 / w2);
        }
      }
    }
  }
  for (auto& v : q) v = 1.0 - v;
  return VoxelGrid(spec, std::move(q));
}

Eigen::Matrix3d euler_rotation(double alpha, double beta, double gamma) {
  return (Eigen::AngleAxisd(alpha, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(beta, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(gamma, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

Molecule apply_rigid_transform(const Molecule& m, const Eigen::Matrix3d& rotation,
                               const Vec3& shift) {
  const Vec3 c = m.centroid();
  Molecule out = m;
  for (auto& a : out.atoms) a.position = rotation * (a.position - c) + c + shift;
  return out;
}

Molecule random_se3_augment(const Molecule& m, Rng& rng, const AugmentOptions& opts) {
  if (m.empty()) throw InvalidArgument("cannot augment an empty molecule");
  if (!m.all_finite()) throw InvalidArgument("molecule has non-finite coordinates");
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> shift(0.0, opts.max_shift);
  const double a = angle(rng);
  const double b = angle(rng);
  const double g = angle(rng);
  Vec3 t;
  for (int ax = 0; ax < 3; ++ax) t[ax] = shift(rng);
  return apply_rigid_transform(m, euler_rotation(a, b, g), t);
}

}  // namespace voxgen
