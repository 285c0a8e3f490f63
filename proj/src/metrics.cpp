// SPDX-License-Identifier: Apache-2.0
#include "voxgen/metrics.hpp"

#include "voxgen/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace voxgen {

namespace {
constexpr double kMassTolerance = 1e-9;
}

CategoricalHistogram::CategoricalHistogram(std::map<std::string, double> mass)
    : mass_(std::move(mass)) {
  double total = 0.0;
  for (const auto& [label, m] : mass_) {
    if (!(m >= 0.0) || !std::isfinite(m)) {
      throw InvalidArgument("histogram mass for '" + label + "' must be finite and >= 0");
    }
    total += m;
  }
  if (std::abs(total - 1.0) > kMassTolerance) {
    throw InvalidArgument("histogram is not normalised (total mass " + std::to_string(total) + ")");
  }
}

CategoricalHistogram CategoricalHistogram::from_counts(const std::map<std::string, double>& counts) {
  double total = 0.0;
  for (const auto& [label, c] : counts) {
    if (!(c >= 0.0)) throw InvalidArgument("negative count for '" + label + "'");
    total += c;
  }
  if (!(total > 0.0)) throw InvalidArgument("cannot normalise an empty histogram");
  std::map<std::string, double> mass;
  for (const auto& [label, c] : counts) mass[label] = c / total;
  return CategoricalHistogram(std::move(mass));
}

double CategoricalHistogram::mass(const std::string& label) const {
  auto it = mass_.find(label);
  return it == mass_.end() ? 0.0 : it->second;
}

EmpiricalSamples::EmpiricalSamples(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_) {
    if (!std::isfinite(v)) throw InvalidArgument("samples must be finite");
  }
  std::sort(values_.begin(), values_.end());
}

double total_variation(const CategoricalHistogram& a, const CategoricalHistogram& b) {
  std::set<std::string> labels;
  for (const auto& [l, m] : a.bins()) labels.insert(l);
  for (const auto& [l, m] : b.bins()) labels.insert(l);
  double tv = 0.0;
  for (const auto& l : labels) tv += std::abs(a.mass(l) - b.mass(l));
  return tv;
}

double wasserstein1(const EmpiricalSamples& a, const EmpiricalSamples& b) {
  if (a.empty() || b.empty()) throw InvalidArgument("W1 needs non-empty sample sets");
  const auto x = a.values();
  const auto y = b.values();
  if (x.size() == y.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
    return s / static_cast<double>(x.size());
  }
  // Integrate |F_a - F_b| over the merged breakpoints.
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(x[0], y[0]);
  double total = 0.0;
  while (i < x.size() || j < y.size()) {
    const double next = (j >= y.size() || (i < x.size() && x[i] <= y[j])) ? x[i] : y[j];
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev);
    while (i < x.size() && x[i] == next) ++i;
    while (j < y.size() && y[j] == next) ++j;
    prev = next;
  }
  return total;
}

std::optional<double> weighted_w1(const std::map<std::string, W1Group>& groups) {
  double total_weight = 0.0;
  for (const auto& [label, g] : groups) {
    if (!(g.weight >= 0.0) || !std::isfinite(g.weight)) {
      throw InvalidArgument("group weight for '" + label + "' must be finite and >= 0");
    }
    if (g.weight > 0.0 && g.reference.empty()) {
      throw InvalidArgument("group '" + label + "' has weight but no reference samples");
    }
    total_weight += g.weight;
  }
  if (std::abs(total_weight - 1.0) > kMassTolerance) {
    throw InvalidArgument("group weights must sum to 1");
  }
  double sum = 0.0;
  double worst = 0.0;
  double missing_weight = 0.0;
  bool any = false;
  for (const auto& [label, g] : groups) {
    if (g.weight == 0.0) continue;
    if (g.generated.empty()) {
      missing_weight += g.weight;
      continue;
    }
    const double w = wasserstein1(g.generated, g.reference);
    sum += g.weight * w;
    worst = std::max(worst, w);
    any = true;
  }
  if (!any) return std::nullopt;
  return sum + missing_weight * worst;
}

std::vector<double> bond_angles(const MolecularGraph& g, std::size_t center) {
  std::vector<int> nb;
  for (const auto& b : g.bonds) {
    if (static_cast<std::size_t>(b.i) == center) nb.push_back(b.j);
    if (static_cast<std::size_t>(b.j) == center) nb.push_back(b.i);
  }
  std::sort(nb.begin(), nb.end());
  std::vector<double> out;
  const Vec3& c = g.molecule.atoms[center].position;
  for (std::size_t p = 0; p < nb.size(); ++p) {
    for (std::size_t q = p + 1; q < nb.size(); ++q) {
      const Vec3 u = g.molecule.atoms[nb[p]].position - c;
      const Vec3 v = g.molecule.atoms[nb[q]].position - c;
      const double cosang = std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0);
      out.push_back(std::acos(cosang) * 180.0 / std::numbers::pi);
    }
  }
  return out;
}

namespace {

std::string bond_label(int order) {
  switch (order) {
    case 1: return "single";
    case 2: return "double";
    case 3: return "triple";
  }
  return "order" + std::to_string(order);
}

struct SetStats {
  std::map<std::string, double> atom_counts;
  std::map<std::string, double> bond_counts;
  std::map<std::string, std::vector<double>> valency;   // by element
  std::map<std::string, std::vector<double>> lengths;   // by bond type
  std::map<std::string, std::vector<double>> angles;    // by centre element
  std::map<std::string, double> angle_centres;          // atoms contributing angles
  std::map<int, std::size_t> sizes;
};

SetStats collect(std::span<const MolecularGraph> set) {
  SetStats s;
  for (const auto& g : set) {
    ++s.sizes[static_cast<int>(g.atoms())];
    const auto val = g.valences();
    for (std::size_t i = 0; i < g.atoms(); ++i) {
      const std::string el(symbol(g.element(i)));
      s.atom_counts[el] += 1.0;
      s.valency[el].push_back(val[i]);
      auto ang = bond_angles(g, i);
      if (!ang.empty()) {
        s.angle_centres[el] += 1.0;
        auto& dst = s.angles[el];
        dst.insert(dst.end(), ang.begin(), ang.end());
      }
    }
    for (const auto& b : g.bonds) {
      const auto label = bond_label(b.order);
      s.bond_counts[label] += 1.0;
      s.lengths[label].push_back(
          (g.molecule.atoms[b.i].position - g.molecule.atoms[b.j].position).norm());
    }
  }
  return s;
}

std::optional<double> grouped_w1(const std::map<std::string, std::vector<double>>& gen,
                                 const std::map<std::string, std::vector<double>>& ref,
                                 const std::map<std::string, double>& ref_weights) {
  double total = 0.0;
  for (const auto& [l, w] : ref_weights) total += w;
  if (!(total > 0.0)) return std::nullopt;
  std::map<std::string, W1Group> groups;
  for (const auto& [label, w] : ref_weights) {
    W1Group g{w / total, {}, EmpiricalSamples(ref.at(label))};
    if (auto it = gen.find(label); it != gen.end()) g.generated = EmpiricalSamples(it->second);
    groups.emplace(label, std::move(g));
  }
  return weighted_w1(groups);
}

}  // namespace

EvalReport evaluate(std::span<const MolecularGraph> generated,
                    std::span<const MolecularGraph> reference, const EvalOptions& opts) {
  if (generated.empty() || reference.empty()) {
    throw InvalidArgument("evaluation needs non-empty generated and reference sets");
  }
  EvalReport r;
  r.generated_molecules = generated.size();
  r.reference_molecules = reference.size();

  std::size_t stable_mols = 0, stable_atoms = 0, total_atoms = 0, valid = 0;
  std::set<std::string> hashes;
  for (const auto& g : generated) {
    g.validate();
    if (g.atoms() == 0) {
      ++r.empty_generated;
      continue;
    }
    const auto st = stability(g, opts.valences);
    stable_atoms += st.stable_atoms;
    total_atoms += g.atoms();
    if (st.molecule_stable) ++stable_mols;
    if (validity_check(g, opts.valences)) {
      ++valid;
      hashes.insert(canonical_hash(g));
    }
  }
  const double n = static_cast<double>(generated.size());
  r.stable_mol_pct = 100.0 * static_cast<double>(stable_mols) / n;
  r.stable_atom_pct = total_atoms ? 100.0 * static_cast<double>(stable_atoms) / total_atoms : 0.0;
  r.valid_pct = 100.0 * static_cast<double>(valid) / n;
  r.unique_pct = valid ? 100.0 * static_cast<double>(hashes.size()) / valid : 0.0;

  const SetStats gs = collect(generated);
  const SetStats rs = collect(reference);
  r.atom_count_histogram = gs.sizes;
  r.reference_atom_count_histogram = rs.sizes;

  if (gs.atom_counts.empty() || rs.atom_counts.empty()) {
    r.atoms_tv = (gs.atom_counts.empty() && rs.atom_counts.empty()) ? 0.0 : 1.0;
  } else {
    r.atoms_tv = total_variation(CategoricalHistogram::from_counts(gs.atom_counts),
                                 CategoricalHistogram::from_counts(rs.atom_counts));
  }
  if (gs.bond_counts.empty() || rs.bond_counts.empty()) {
    r.bonds_tv = (gs.bond_counts.empty() && rs.bond_counts.empty()) ? 0.0 : 1.0;
  } else {
    r.bonds_tv = total_variation(CategoricalHistogram::from_counts(gs.bond_counts),
                                 CategoricalHistogram::from_counts(rs.bond_counts));
  }

  r.valency_w1 = grouped_w1(gs.valency, rs.valency, rs.atom_counts);
  r.bond_length_w1 = grouped_w1(gs.lengths, rs.lengths, rs.bond_counts);
  r.bond_angle_w1 = grouped_w1(gs.angles, rs.angles, rs.angle_centres);
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  auto hist = [](const std::map<int, std::size_t>& h) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : h) j[std::to_string(k)] = v;
    return j;
  };
  nlohmann::json j;
  j["stable_mol_pct"] = r.stable_mol_pct;
  j["stable_atom_pct"] = r.stable_atom_pct;
  j["valid_pct"] = r.valid_pct;
  j["unique_pct"] = r.unique_pct;
  j["valency_w1"] = opt(r.valency_w1);
  j["atoms_tv"] = r.atoms_tv;
  j["bonds_tv"] = r.bonds_tv;
  j["bond_length_w1"] = opt(r.bond_length_w1);
  j["bond_angle_w1"] = opt(r.bond_angle_w1);
  j["atom_count_histogram"] = {{"generated", hist(r.atom_count_histogram)},
                               {"reference", hist(r.reference_atom_count_histogram)}};
  j["counts"] = {{"generated", r.generated_molecules},
                 {"reference", r.reference_molecules},
                 {"empty_generated", r.empty_generated}};
  return j;
}

std::string to_document(const EvalReport& r) { return to_json(r).dump(2) + "\n"; }

}  // namespace voxgen
