// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxgen/molecule.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace voxgen {

/// Single-bond covalent radii (Angstrom) plus the tolerance added to radius
/// sums when deciding whether two atoms are bonded.
///
/// Defaults are the Cordero et al. (2008) covalent radii; carbon uses the
/// sp3 value.
///   H 0.31  C 0.76  N 0.71  O 0.66  F 0.57  S 1.05  Cl 1.02  Br 1.20
struct BondTable {
  std::map<Element, double> radius;
  double tolerance = 0.4;

  static BondTable defaults();
  /// Throws ConfigError for elements missing from the table.
  double radius_of(Element e) const;
  void validate() const;
};

/// Allowed total bond orders per element.
struct ValenceTable {
  std::map<Element, std::vector<int>> allowed;

  /// H {1}, C {4}, N {3}, O {2}, F {1}, S {2,4,6}, Cl {1}, Br {1}
  static ValenceTable defaults();
  /// Throws ConfigError for elements missing from the table.
  const std::vector<int>& allowed_of(Element e) const;
  int max_of(Element e) const;
  void validate() const;
};

/// Reads "radius.<El> = x", "tolerance = x" and "valence.<El> = a,b,c" lines
/// ('#' starts a comment) over the given tables. Unknown keys are errors.
void load_chem_tables(std::string_view text, BondTable& bonds, ValenceTable& valences);
void load_chem_tables_file(const std::string& path, BondTable& bonds, ValenceTable& valences);

struct Bond {
  int i;
  int j;  // i < j
  int order;  // 1, 2 or 3

  bool operator==(const Bond&) const = default;
};

struct MolecularGraph {
  Molecule molecule;  // node elements and source coordinates
  std::vector<Bond> bonds;

  std::size_t atoms() const noexcept { return molecule.size(); }
  Element element(std::size_t i) const { return molecule.atoms[i].element; }
  /// Summed bond order per atom.
  std::vector<int> valences() const;
  std::vector<std::vector<int>> neighbours() const;
  /// Throws InvalidArgument if bonds violate i < j, uniqueness or range.
  void validate() const;
};

/// A single bond wherever |xi - xj| <= r(ei) + r(ej) + tolerance; orders are
/// then raised greedily, shortest bond first, while both ends still lack
/// valence relative to the nearest allowed value at or above their current
/// sum. Deterministic.
MolecularGraph perceive_bonds(const Molecule& m, const BondTable& table,
                              const ValenceTable& valences = ValenceTable::defaults());

struct Stability {
  double atom_stable_fraction = 0.0;
  std::size_t stable_atoms = 0;
  bool molecule_stable = false;
};

/// An atom is stable iff its summed bond order is an allowed valence.
Stability stability(const MolecularGraph& g, const ValenceTable& vt);

/// Desk-scale validity surrogate: non-empty and no atom above its maximum
/// allowed valence. Not comparable to RDKit sanitization.
bool validity_check(const MolecularGraph& g, const ValenceTable& vt);

/// Weisfeiler-Lehman hash over element/degree labels with bond orders on the
/// edges, run for max(|V|, 1) rounds. Invariant under atom reordering and
/// independent of coordinates. 16 hex digits.
std::string canonical_hash(const MolecularGraph& g);

}  // namespace voxgen
