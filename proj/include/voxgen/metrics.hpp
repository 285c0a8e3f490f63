// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxgen/chem.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace voxgen {

/// Label -> probability mass. Masses are non-negative and sum to 1.
class CategoricalHistogram {
 public:
  CategoricalHistogram() = default;
  /// Throws InvalidArgument unless masses are >= 0 and sum to 1 within 1e-9.
  explicit CategoricalHistogram(std::map<std::string, double> mass);
  /// Normalises raw counts. Throws on an all-zero count table.
  static CategoricalHistogram from_counts(const std::map<std::string, double>& counts);

  double mass(const std::string& label) const;
  const std::map<std::string, double>& bins() const noexcept { return mass_; }

 private:
  std::map<std::string, double> mass_;
};

/// Sorted finite observations.
class EmpiricalSamples {
 public:
  EmpiricalSamples() = default;
  explicit EmpiricalSamples(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

 private:
  std::vector<double> values_;
};

/// Sum over the union of labels of |a(x) - b(x)|; in [0, 2].
double total_variation(const CategoricalHistogram& a, const CategoricalHistogram& b);

/// Exact W1 = integral of |F_a - F_b|. Throws InvalidArgument on empty input.
double wasserstein1(const EmpiricalSamples& a, const EmpiricalSamples& b);

struct W1Group {
  double weight;               // reference frequency of the label
  EmpiricalSamples generated;  // may be empty
  EmpiricalSamples reference;
};

/// sum_x weight(x) W1(generated(x), reference(x)). A group with no generated
/// samples contributes weight x (largest W1 among the comparable groups), so
/// dropping a mode is never free. Returns nullopt when no group is comparable
/// at all. Weights must sum to 1 within 1e-9.
std::optional<double> weighted_w1(const std::map<std::string, W1Group>& groups);

struct EvalReport {
  double stable_mol_pct = 0.0;
  double stable_atom_pct = 0.0;
  double valid_pct = 0.0;
  double unique_pct = 0.0;
  std::optional<double> valency_w1;
  double atoms_tv = 0.0;
  /// 1 when exactly one side has no bonds, 0 when neither has any.
  double bonds_tv = 0.0;
  std::optional<double> bond_length_w1;
  std::optional<double> bond_angle_w1;
  std::map<int, std::size_t> atom_count_histogram;            // generated set
  std::map<int, std::size_t> reference_atom_count_histogram;  // reference set
  std::size_t generated_molecules = 0;
  std::size_t reference_molecules = 0;
  std::size_t empty_generated = 0;
};

struct EvalOptions {
  ValenceTable valences = ValenceTable::defaults();
};

/// Compares perceived graphs of a generated set against a reference set.
/// Empty generated molecules count as unstable and invalid.
EvalReport evaluate(std::span<const MolecularGraph> generated,
                    std::span<const MolecularGraph> reference, const EvalOptions& opts = {});

nlohmann::json to_json(const EvalReport& r);
std::string to_document(const EvalReport& r);

/// Bond angles in degrees at `center` over unordered pairs of bonded neighbours.
std::vector<double> bond_angles(const MolecularGraph& g, std::size_t center);

}  // namespace voxgen
