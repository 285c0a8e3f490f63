// SPDX-License-Identifier: Apache-2.0
#include "voxgen/errors.hpp"
#include "voxgen/io.hpp"
#include "voxgen/metrics.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <numeric>

using namespace voxgen;

namespace {

// Minimum mean cost over all one-to-one pairings.
double brute_force_w1(std::vector<double> a, const std::vector<double>& b) {
  std::sort(a.begin(), a.end());
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) cost += std::abs(a[i] - b[i]);
    best = std::min(best, cost / static_cast<double>(a.size()));
  } while (std::next_permutation(a.begin(), a.end()));
  return best;
}

// Unequal sizes: repeat each sample so both sets share the size lcm(n, m),
// then pair in sorted order.
double replicated_w1(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t l = std::lcm(a.size(), b.size());
  std::vector<double> ra, rb;
  for (double v : a) ra.insert(ra.end(), l / a.size(), v);
  for (double v : b) rb.insert(rb.end(), l / b.size(), v);
  std::sort(ra.begin(), ra.end());
  std::sort(rb.begin(), rb.end());
  double cost = 0.0;
  for (std::size_t i = 0; i < l; ++i) cost += std::abs(ra[i] - rb[i]);
  return cost / static_cast<double>(l);
}

std::vector<double> dyadic_samples(std::size_t n, Rng& rng) {
  std::uniform_int_distribution<int> k(-64, 64);
  std::vector<double> out(n);
  for (auto& v : out) v = k(rng) / 8.0;
  return out;
}

MolecularGraph perceived(const Molecule& m) { return perceive_bonds(m, BondTable::defaults()); }

std::vector<MolecularGraph> fixture_graphs() {
  std::vector<MolecularGraph> out;
  for (const auto& f : list_xyz_files(VOXGEN_FIXTURE_DIR)) out.push_back(perceived(read_xyz_file(f)));
  return out;
}

}  // namespace

TEST(Histogram, Validation) {
  EXPECT_THROW(CategoricalHistogram({{"A", 0.5}, {"B", 0.4}}), InvalidArgument);
  EXPECT_THROW(CategoricalHistogram({{"A", 1.5}, {"B", -0.5}}), InvalidArgument);
  const auto h = CategoricalHistogram::from_counts({{"A", 3}, {"B", 1}});
  EXPECT_DOUBLE_EQ(h.mass("A"), 0.75);
  EXPECT_DOUBLE_EQ(h.mass("C"), 0.0);
}

TEST(TotalVariation, Examples) {
  const CategoricalHistogram ab({{"A", 0.5}, {"B", 0.5}});
  EXPECT_EQ(total_variation(ab, ab), 0.0);
  EXPECT_EQ(total_variation(CategoricalHistogram({{"A", 1.0}}), CategoricalHistogram({{"B", 1.0}})), 2.0);
  EXPECT_EQ(total_variation(ab, CategoricalHistogram({{"A", 1.0}})), 1.0);
}

TEST(TotalVariation, MetricAxioms) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<std::string> labels{"C", "H", "N", "O", "F"};
  auto random_hist = [&] {
    std::map<std::string, double> counts;
    for (const auto& l : labels) {
      if (u(rng) < 0.7) counts[l] = u(rng) + 0.01;
    }
    if (counts.empty()) counts["C"] = 1.0;
    return CategoricalHistogram::from_counts(counts);
  };
  for (int t = 0; t < 100; ++t) {
    const auto a = random_hist(), b = random_hist(), c = random_hist();
    EXPECT_EQ(total_variation(a, b), total_variation(b, a));
    EXPECT_EQ(total_variation(a, a), 0.0);
    EXPECT_GE(total_variation(a, b), 0.0);
    EXPECT_LE(total_variation(a, b), 2.0 + 1e-12);
    EXPECT_LE(total_variation(a, c), total_variation(a, b) + total_variation(b, c) + 1e-12);
  }
}

TEST(Wasserstein, Examples) {
  const EmpiricalSamples s({0.3, 1.7, -2.0});
  EXPECT_EQ(wasserstein1(s, s), 0.0);
  EXPECT_DOUBLE_EQ(wasserstein1(EmpiricalSamples({2.5}), EmpiricalSamples({-1.0})), 3.5);
  EXPECT_DOUBLE_EQ(wasserstein1(EmpiricalSamples({0.0, 1.0}), EmpiricalSamples({0.5, 1.5})), 0.5);
  EXPECT_DOUBLE_EQ(brute_force_w1({0.0, 1.0}, {0.5, 1.5}), 0.5);
}

TEST(Wasserstein, Validation) {
  EXPECT_THROW(wasserstein1(EmpiricalSamples(), EmpiricalSamples({1.0})), InvalidArgument);
  EXPECT_THROW(EmpiricalSamples({1.0, std::numeric_limits<double>::quiet_NaN()}), InvalidArgument);
  const EmpiricalSamples s({3.0, -1.0, 2.0});
  EXPECT_TRUE(std::is_sorted(s.values().begin(), s.values().end()));
}

TEST(Wasserstein, EqualsExhaustivePairing) {
  Rng rng(2);
  std::uniform_int_distribution<std::size_t> size(1, 6);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = size(rng);
    const auto a = dyadic_samples(n, rng);
    const auto b = dyadic_samples(n, rng);
    EXPECT_EQ(wasserstein1(EmpiricalSamples(a), EmpiricalSamples(b)), brute_force_w1(a, b));
  }
}

TEST(Wasserstein, UnequalSizesMatchReplication) {
  Rng rng(3);
  std::uniform_int_distribution<std::size_t> size(1, 6);
  for (int t = 0; t < 500; ++t) {
    const auto a = dyadic_samples(size(rng), rng);
    const auto b = dyadic_samples(size(rng), rng);
    EXPECT_NEAR(wasserstein1(EmpiricalSamples(a), EmpiricalSamples(b)), replicated_w1(a, b), 1e-12);
  }
}

TEST(Wasserstein, MetricAxiomsAndScaling) {
  Rng rng(4);
  std::normal_distribution<double> g(0.0, 2.0);
  std::uniform_int_distribution<std::size_t> size(1, 30);
  auto draw = [&] {
    std::vector<double> v(size(rng));
    for (auto& x : v) x = g(rng);
    return v;
  };
  for (int t = 0; t < 100; ++t) {
    const auto a = draw(), b = draw(), c = draw();
    const EmpiricalSamples sa(a), sb(b), sc(c);
    const double ab = wasserstein1(sa, sb);
    EXPECT_NEAR(ab, wasserstein1(sb, sa), 1e-12);
    EXPECT_EQ(wasserstein1(sa, sa), 0.0);
    EXPECT_LE(wasserstein1(sa, sc), ab + wasserstein1(sb, sc) + 1e-12);
    for (double k : {0.5, 3.0, 17.25}) {
      std::vector<double> ka = a, kb = b;
      for (auto& x : ka) x *= k;
      for (auto& x : kb) x *= k;
      EXPECT_NEAR(wasserstein1(EmpiricalSamples(ka), EmpiricalSamples(kb)), k * ab, 1e-12 * k * (1 + ab));
    }
  }
}

TEST(WeightedW1, Examples) {
  const EmpiricalSamples x({1.0, 2.0, 3.0});
  EXPECT_EQ(*weighted_w1({{"a", {0.5, x, x}}, {"b", {0.5, x, x}}}), 0.0);

  const EmpiricalSamples p({0.0, 1.0}), q({0.5, 1.5});
  EXPECT_DOUBLE_EQ(*weighted_w1({{"only", {1.0, p, q}}}), wasserstein1(p, q));

  const EmpiricalSamples r({0.0}), s({0.4});
  EXPECT_NEAR(*weighted_w1({{"a", {0.25, r, s}}, {"b", {0.75, x, x}}}), 0.1, 1e-15);
}

TEST(WeightedW1, MissingGroupPaysLargestObservedDistance) {
  const EmpiricalSamples r({0.0}), s({0.4}), t({1.0});
  // group c is absent from the generated side: penalty 0.5 * 0.4
  const auto v = weighted_w1({{"a", {0.25, r, s}}, {"b", {0.25, t, t}}, {"c", {0.5, {}, t}}});
  EXPECT_NEAR(*v, 0.25 * 0.4 + 0.5 * 0.4, 1e-15);
  EXPECT_FALSE(weighted_w1({{"a", {1.0, {}, t}}}).has_value());
}

TEST(WeightedW1, Validation) {
  const EmpiricalSamples x({1.0});
  EXPECT_THROW(weighted_w1({{"a", {0.5, x, x}}, {"b", {0.4, x, x}}}), InvalidArgument);
  EXPECT_THROW(weighted_w1({{"a", {-0.5, x, x}}, {"b", {1.5, x, x}}}), InvalidArgument);
}

TEST(BondAngles, Water) {
  const auto g = perceived(water());
  const auto a = bond_angles(g, 0);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_NEAR(a[0], 104.52, 1e-6);
  EXPECT_TRUE(bond_angles(g, 1).empty());
  // methane: four neighbours give six angles
  EXPECT_EQ(bond_angles(perceived(methane()), 0).size(), 6u);
}

TEST(Evaluate, ReferenceAgainstItself) {
  const auto ref = fixture_graphs();
  const auto r = evaluate(ref, ref);
  EXPECT_EQ(r.atoms_tv, 0.0);
  EXPECT_EQ(r.bonds_tv, 0.0);
  EXPECT_EQ(r.valency_w1.value(), 0.0);
  EXPECT_EQ(r.bond_length_w1.value(), 0.0);
  EXPECT_EQ(r.bond_angle_w1.value(), 0.0);
  EXPECT_DOUBLE_EQ(r.stable_mol_pct, 100.0);
  EXPECT_DOUBLE_EQ(r.valid_pct, 100.0);
  EXPECT_DOUBLE_EQ(r.unique_pct, 100.0);
  EXPECT_EQ(r.atom_count_histogram, r.reference_atom_count_histogram);
}

TEST(Evaluate, TenCopiesAreTenPercentUnique) {
  const std::vector<MolecularGraph> gen(10, perceived(methane()));
  const auto r = evaluate(gen, fixture_graphs());
  EXPECT_DOUBLE_EQ(r.valid_pct, 100.0);
  EXPECT_DOUBLE_EQ(r.unique_pct, 10.0);
  EXPECT_EQ(r.atom_count_histogram.at(5), 10u);
}

TEST(Evaluate, OneUnderValentMoleculeInFour) {
  Molecule methyl = methane();
  methyl.atoms.pop_back();
  const std::vector<MolecularGraph> gen{perceived(methane()), perceived(water()), perceived(ethane()),
                                        perceived(methyl)};
  const auto r = evaluate(gen, gen);
  EXPECT_DOUBLE_EQ(r.stable_mol_pct, 75.0);
  EXPECT_DOUBLE_EQ(r.stable_atom_pct, 100.0 * (5 + 3 + 8 + 3) / 20.0);
  EXPECT_DOUBLE_EQ(r.valid_pct, 100.0);
}

TEST(Evaluate, EmptyGeneratedMoleculesCountAgainstRates) {
  const std::vector<MolecularGraph> gen{perceived(methane()), MolecularGraph{}};
  const auto r = evaluate(gen, fixture_graphs());
  EXPECT_DOUBLE_EQ(r.stable_mol_pct, 50.0);
  EXPECT_DOUBLE_EQ(r.valid_pct, 50.0);
  EXPECT_EQ(r.empty_generated, 1u);
}

TEST(Evaluate, DistancesArePositiveForDifferentSets) {
  const std::vector<MolecularGraph> gen{perceived(water()), perceived(water())};
  const auto r = evaluate(gen, fixture_graphs());
  EXPECT_GT(r.atoms_tv, 0.0);
  EXPECT_GT(r.bonds_tv, 0.0);
  EXPECT_GT(r.bond_length_w1.value(), 0.0);
  EXPECT_GE(r.valency_w1.value(), 0.0);
}

TEST(Evaluate, Validation) {
  const std::vector<MolecularGraph> one{perceived(water())};
  EXPECT_THROW(evaluate({}, one), InvalidArgument);
  EXPECT_THROW(evaluate(one, {}), InvalidArgument);
}

TEST(Evaluate, DeterministicAndSerialisable) {
  const auto ref = fixture_graphs();
  const std::vector<MolecularGraph> gen{perceived(water()), perceived(ethane())};
  const auto a = to_document(evaluate(gen, ref));
  EXPECT_EQ(a, to_document(evaluate(gen, ref)));
  const auto j = nlohmann::json::parse(a);
  for (const char* key : {"stable_mol_pct", "stable_atom_pct", "valid_pct", "unique_pct", "valency_w1",
                          "atoms_tv", "bonds_tv", "bond_length_w1", "bond_angle_w1",
                          "atom_count_histogram"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["atom_count_histogram"]["generated"]["3"], 1);
}
