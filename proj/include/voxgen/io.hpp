// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxgen/grid.hpp"
#include "voxgen/molecule.hpp"
#include "voxgen/random.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace voxgen {

/// XYZ text: atom count line, comment line, then "El x y z" per atom.
/// Errors carry the 1-based line number.
Molecule parse_xyz(std::string_view text);
/// Coordinates are written with 8 decimals.
std::string write_xyz(const Molecule& m, std::string_view comment = "");
Molecule read_xyz_file(const std::string& path);
void write_xyz_file(const std::string& path, const Molecule& m, std::string_view comment = "");
/// All *.xyz files of a directory, sorted by file name.
std::vector<std::string> list_xyz_files(const std::string& dir);

/// Binary grid file, little endian:
///   "VXGR" | u32 version | u32 channels | u32 length | f64 resolution |
///   f64 atom_radius | channels * length^3 f32, channel-major
inline constexpr std::uint32_t kGridFileVersion = 1;
inline constexpr std::size_t kGridHeaderBytes = 32;

void write_grid(std::ostream& os, const VoxelGrid& grid);
VoxelGrid read_grid(std::istream& is);
void write_grid_file(const std::string& path, const VoxelGrid& grid);
VoxelGrid read_grid_file(const std::string& path);

struct SynthConstraints {
  int min_atoms = 3;
  int max_atoms = 20;
  double min_separation = 1.0;    // Angstrom
  double placement_radius = 2.5;  // atoms lie within this distance of the origin
  /// Relative element frequencies; empty means uniform over C, H, N, O.
  std::map<Element, double> element_weights;
  int max_retries = 10000;

  void validate() const;
};

/// Rejection-sampled random point clouds with a minimum pairwise separation.
/// Throws GenerationError when placement keeps failing.
std::vector<Molecule> synth_molecules(std::size_t n, Rng& rng, const SynthConstraints& c = {});

/// Template geometries with standard bond lengths and angles.
Molecule water();
Molecule methane();
Molecule ethane();

}  // namespace voxgen
