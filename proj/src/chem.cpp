// SPDX-License-Identifier: Apache-2.0
#include "voxgen/chem.hpp"

#include "voxgen/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

namespace voxgen {

BondTable BondTable::defaults() {
  BondTable t;
  t.radius = {{Element::H, 0.31}, {Element::C, 0.76}, {Element::N, 0.71},
              {Element::O, 0.66}, {Element::F, 0.57}, {Element::S, 1.05},
              {Element::Cl, 1.02}, {Element::Br, 1.20}};
  return t;
}

double BondTable::radius_of(Element e) const {
  auto it = radius.find(e);
  if (it == radius.end()) {
    throw ConfigError("no covalent radius for element " + std::string(symbol(e)));
  }
  return it->second;
}

void BondTable::validate() const {
  for (const auto& [e, r] : radius) {
    if (!(r > 0.0)) throw ConfigError("covalent radius of " + std::string(symbol(e)) + " must be positive");
  }
  if (!(tolerance >= 0.0)) throw ConfigError("bond tolerance must be >= 0");
}

ValenceTable ValenceTable::defaults() {
  ValenceTable t;
  t.allowed = {{Element::H, {1}}, {Element::C, {4}},     {Element::N, {3}},
               {Element::O, {2}}, {Element::F, {1}},     {Element::S, {2, 4, 6}},
               {Element::Cl, {1}}, {Element::Br, {1}}};
  return t;
}

const std::vector<int>& ValenceTable::allowed_of(Element e) const {
  auto it = allowed.find(e);
  if (it == allowed.end()) {
    throw ConfigError("no valence entry for element " + std::string(symbol(e)));
  }
  return it->second;
}

int ValenceTable::max_of(Element e) const {
  const auto& a = allowed_of(e);
  return *std::max_element(a.begin(), a.end());
}

void ValenceTable::validate() const {
  for (const auto& [e, v] : allowed) {
    if (v.empty()) throw ConfigError("empty valence set for " + std::string(symbol(e)));
  }
}

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_number(const std::string& v, std::size_t line) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::logic_error&) {
    throw ParseError(line, "malformed number '" + v + "'");
  }
}

Element parse_element(const std::string& s, std::size_t line) {
  auto e = element_from_symbol(s);
  if (!e) throw ParseError(line, "unknown element '" + s + "'");
  return *e;
}

}  // namespace

void load_chem_tables(std::string_view text, BondTable& bonds, ValenceTable& valences) {
  std::istringstream is{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(is, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    raw = trim(raw);
    if (raw.empty()) continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos) throw ParseError(line, "expected key = value");
    const std::string key = trim(raw.substr(0, eq));
    const std::string value = trim(raw.substr(eq + 1));
    if (key == "tolerance") {
      bonds.tolerance = parse_number(value, line);
    } else if (key.rfind("radius.", 0) == 0) {
      bonds.radius[parse_element(key.substr(7), line)] = parse_number(value, line);
    } else if (key.rfind("valence.", 0) == 0) {
      std::vector<int> set;
      std::istringstream vs(value);
      std::string tok;
      while (std::getline(vs, tok, ',')) {
        const double d = parse_number(trim(tok), line);
        if (d != static_cast<int>(d) || d < 0) throw ParseError(line, "valence must be a non-negative integer");
        set.push_back(static_cast<int>(d));
      }
      std::sort(set.begin(), set.end());
      valences.allowed[parse_element(key.substr(8), line)] = std::move(set);
    } else {
      throw ParseError(line, "unknown key '" + key + "'");
    }
  }
  bonds.validate();
  valences.validate();
}

void load_chem_tables_file(const std::string& path, BondTable& bonds, ValenceTable& valences) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  load_chem_tables(ss.str(), bonds, valences);
}

std::vector<int> MolecularGraph::valences() const {
  std::vector<int> v(atoms(), 0);
  for (const auto& b : bonds) {
    v[b.i] += b.order;
    v[b.j] += b.order;
  }
  return v;
}

std::vector<std::vector<int>> MolecularGraph::neighbours() const {
  std::vector<std::vector<int>> n(atoms());
  for (const auto& b : bonds) {
    n[b.i].push_back(b.j);
    n[b.j].push_back(b.i);
  }
  return n;
}

void MolecularGraph::validate() const {
  std::vector<std::pair<int, int>> seen;
  for (const auto& b : bonds) {
    if (b.i < 0 || b.j < 0 || static_cast<std::size_t>(b.j) >= atoms() || b.i >= b.j) {
      throw InvalidArgument("bond indices must satisfy 0 <= i < j < atoms");
    }
    if (b.order < 1 || b.order > 3) throw InvalidArgument("bond order must be 1, 2 or 3");
    seen.emplace_back(b.i, b.j);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw InvalidArgument("duplicate bond");
  }
}

MolecularGraph perceive_bonds(const Molecule& m, const BondTable& table,
                              const ValenceTable& valences) {
  MolecularGraph g;
  g.molecule = m;
  const int n = static_cast<int>(m.size());
  std::vector<double> length;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = (m.atoms[i].position - m.atoms[j].position).norm();
      const double limit =
          table.radius_of(m.atoms[i].element) + table.radius_of(m.atoms[j].element) + table.tolerance;
      if (d <= limit) {
        g.bonds.push_back({i, j, 1});
        length.push_back(d);
      }
    }
  }

  std::vector<std::size_t> order(g.bonds.size());
  for (std::size_t b = 0; b < order.size(); ++b) order[b] = b;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return length[a] < length[b]; });

  auto current = g.valences();
  auto deficit = [&](int atom) {
    const auto& allowed = valences.allowed_of(m.atoms[atom].element);
    for (int v : allowed) {
      if (v >= current[atom]) return v - current[atom];
    }
    return 0;
  };
  for (std::size_t b : order) {
    Bond& bond = g.bonds[b];
    const int raise = std::min({deficit(bond.i), deficit(bond.j), 3 - bond.order});
    if (raise > 0) {
      bond.order += raise;
      current[bond.i] += raise;
      current[bond.j] += raise;
    }
  }
  return g;
}

Stability stability(const MolecularGraph& g, const ValenceTable& vt) {
  if (g.atoms() == 0) throw InvalidArgument("stability of an empty graph is undefined");
  const auto val = g.valences();
  Stability s;
  for (std::size_t i = 0; i < g.atoms(); ++i) {
    const auto& allowed = vt.allowed_of(g.element(i));
    if (std::find(allowed.begin(), allowed.end(), val[i]) != allowed.end()) ++s.stable_atoms;
  }
  s.atom_stable_fraction = static_cast<double>(s.stable_atoms) / static_cast<double>(g.atoms());
  s.molecule_stable = s.stable_atoms == g.atoms();
  return s;
}

bool validity_check(const MolecularGraph& g, const ValenceTable& vt) {
  if (g.atoms() == 0) return false;
  const auto val = g.valences();
  for (std::size_t i = 0; i < g.atoms(); ++i) {
    auto it = vt.allowed.find(g.element(i));
    if (it == vt.allowed.end()) return false;
    if (val[i] > *std::max_element(it->second.begin(), it->second.end())) return false;
  }
  return true;
}

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  // FNV-1a over the 8 bytes of v, followed by a splitmix64 finaliser.
  for (int b = 0; b < 8; ++b) {
    h ^= (v >> (8 * b)) & 0xFFu;
    h *= 0x100000001b3ULL;
  }
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

constexpr std::uint64_t kSeed = 0xcbf29ce484222325ULL;

}  // namespace

std::string canonical_hash(const MolecularGraph& g) {
  const std::size_t n = g.atoms();
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbour, order)
  for (const auto& b : g.bonds) {
    adj[b.i].emplace_back(b.j, b.order);
    adj[b.j].emplace_back(b.i, b.order);
  }
  std::vector<std::uint64_t> label(n);
  for (std::size_t v = 0; v < n; ++v) {
    label[v] = mix(mix(kSeed, static_cast<std::uint64_t>(g.element(v)) + 1), adj[v].size());
  }

  std::vector<std::uint64_t> history(label);
  const std::size_t rounds = std::max<std::size_t>(n, 1);
  std::vector<std::uint64_t> next(n);
  std::vector<std::uint64_t> nb;
  for (std::size_t r = 0; r < rounds; ++r) {
    for (std::size_t v = 0; v < n; ++v) {
      nb.clear();
      for (auto [u, order] : adj[v]) nb.push_back(mix(static_cast<std::uint64_t>(order), label[u]));
      std::sort(nb.begin(), nb.end());
      std::uint64_t h = mix(kSeed, label[v]);
      for (auto x : nb) h = mix(h, x);
      next[v] = h;
    }
    label.swap(next);
    history.insert(history.end(), label.begin(), label.end());
  }
  std::sort(history.begin(), history.end());
  std::uint64_t h = mix(kSeed, n);
  for (auto x : history) h = mix(h, x);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace voxgen
