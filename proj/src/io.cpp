// SPDX-License-Identifier: Apache-2.0
#include "voxgen/io.hpp"

#include "binary_io.hpp"
#include "voxgen/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace voxgen {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_coord(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ParseError(line, "malformed coordinate '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

Molecule parse_xyz(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto l = text.substr(start, end - start);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    lines.push_back(l);
    start = end + 1;
  }
  if (lines.empty()) throw ParseError(1, "missing atom count line");
  const auto head = split_ws(lines[0]);
  long count = -1;
  if (head.size() == 1) {
    auto [ptr, ec] = std::from_chars(head[0].data(), head[0].data() + head[0].size(), count);
    if (ec != std::errc() || ptr != head[0].data() + head[0].size()) count = -1;
  }
  if (count < 0) throw ParseError(1, "expected a non-negative atom count");
  if (lines.size() < 2) throw ParseError(2, "missing comment line");

  Molecule m;
  for (long a = 0; a < count; ++a) {
    const std::size_t lineno = static_cast<std::size_t>(a) + 3;
    if (lineno > lines.size()) {
      throw ParseError(lineno, "expected " + std::to_string(count) + " atoms, found " +
                                   std::to_string(a));
    }
    const auto tok = split_ws(lines[lineno - 1]);
    if (tok.empty()) {
      throw ParseError(lineno, "expected " + std::to_string(count) + " atoms, found " +
                                   std::to_string(a));
    }
    if (tok.size() < 4) throw ParseError(lineno, "expected 'element x y z'");
    auto e = element_from_symbol(tok[0]);
    if (!e) throw ParseError(lineno, "unknown element '" + std::string(tok[0]) + "'");
    m.atoms.push_back({*e, Vec3(parse_coord(tok[1], lineno), parse_coord(tok[2], lineno),
                                parse_coord(tok[3], lineno))});
  }
  for (std::size_t l = static_cast<std::size_t>(count) + 2; l < lines.size(); ++l) {
    if (!split_ws(lines[l]).empty()) {
      throw ParseError(l + 1, "more atom lines than the declared count " + std::to_string(count));
    }
  }
  return m;
}

std::string write_xyz(const Molecule& m, std::string_view comment) {
  std::ostringstream os;
  os << m.size() << '\n';
  std::string c(comment);
  std::replace(c.begin(), c.end(), '\n', ' ');
  os << c << '\n';
  os << std::fixed << std::setprecision(8);
  for (const auto& a : m.atoms) {
    os << symbol(a.element) << ' ' << a.position.x() << ' ' << a.position.y() << ' '
       << a.position.z() << '\n';
  }
  return os.str();
}

Molecule read_xyz_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_xyz(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + e.what());
  }
}

void write_xyz_file(const std::string& path, const Molecule& m, std::string_view comment) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << write_xyz(m, comment);
  if (!os) throw IoError("failed writing '" + path + "'");
}

std::vector<std::string> list_xyz_files(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("'" + dir + "' is not a directory");
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".xyz") {
      out.push_back(entry.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {
constexpr char kGridMagic[4] = {'V', 'X', 'G', 'R'};
}

void write_grid(std::ostream& os, const VoxelGrid& grid) {
  grid.spec.validate();
  if (grid.values.size() != grid.spec.size()) throw InvalidArgument("grid payload does not match its spec");
  os.write(kGridMagic, 4);
  detail::put_le<std::uint32_t>(os, kGridFileVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(grid.spec.channels));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(grid.spec.length));
  detail::put_f64(os, grid.spec.resolution);
  detail::put_f64(os, grid.spec.atom_radius);
  for (double v : grid.values) detail::put_f32(os, static_cast<float>(v));
  if (!os) throw IoError("failed writing grid");
}

VoxelGrid read_grid(std::istream& is) {
  detail::LeReader r(is, "grid file header");
  char magic[4];
  r.read_raw(magic, 4);
  if (std::memcmp(magic, kGridMagic, 4) != 0) throw FormatError("not a grid file (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kGridFileVersion) {
    throw FormatError("grid file version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kGridFileVersion) + ")");
  }
  GridSpec spec;
  spec.channels = static_cast<int>(r.get<std::uint32_t>());
  spec.length = static_cast<int>(r.get<std::uint32_t>());
  spec.resolution = r.get_f64();
  spec.atom_radius = r.get_f64();
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("bad grid header: ") + e.what());
  }
  const std::size_t expected = spec.size() * 4;
  std::vector<char> payload(expected);
  is.read(payload.data(), static_cast<std::streamsize>(expected));
  const auto got = static_cast<std::size_t>(is.gcount());
  if (got != expected) {
    throw FormatError("grid file truncated: expected " + std::to_string(kGridHeaderBytes + expected) +
                      " bytes, got " + std::to_string(kGridHeaderBytes + got));
  }
  std::vector<double> values(spec.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[4 * i + b])) << (8 * b);
    }
    values[i] = std::bit_cast<float>(bits);
  }
  return VoxelGrid(spec, std::move(values));
}

void write_grid_file(const std::string& path, const VoxelGrid& grid) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_grid(os, grid);
}

VoxelGrid read_grid_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_grid(is);
}

void SynthConstraints::validate() const {
  if (min_atoms < 1 || max_atoms < min_atoms) throw InvalidArgument("bad atom count range");
  if (!(min_separation > 0.0)) throw InvalidArgument("min separation must be positive");
  if (!(placement_radius > 0.0)) throw InvalidArgument("placement radius must be positive");
  for (const auto& [e, w] : element_weights) {
    if (!(w >= 0.0)) throw InvalidArgument("element weights must be >= 0");
  }
  if (max_retries < 1) throw InvalidArgument("max_retries must be >= 1");
}

std::vector<Molecule> synth_molecules(std::size_t n, Rng& rng, const SynthConstraints& c) {
  c.validate();
  std::vector<Element> elems;
  std::vector<double> weights;
  if (c.element_weights.empty()) {
    elems = {Element::C, Element::H, Element::N, Element::O};
    weights.assign(4, 1.0);
  } else {
    for (const auto& [e, w] : c.element_weights) {
      elems.push_back(e);
      weights.push_back(w);
    }
  }
  std::discrete_distribution<std::size_t> pick_element(weights.begin(), weights.end());
  std::uniform_int_distribution<int> pick_count(c.min_atoms, c.max_atoms);
  std::uniform_real_distribution<double> coord(-c.placement_radius, c.placement_radius);

  std::vector<Molecule> out;
  out.reserve(n);
  for (std::size_t m = 0; m < n; ++m) {
    const int count = pick_count(rng);
    Molecule mol;
    int failures = 0;
    while (static_cast<int>(mol.size()) < count) {
      Vec3 p;
      for (int ax = 0; ax < 3; ++ax) p[ax] = coord(rng);
      bool ok = p.norm() <= c.placement_radius;
      for (const auto& a : mol.atoms) {
        if (!ok) break;
        ok = (a.position - p).norm() >= c.min_separation;
      }
      if (ok) {
        mol.atoms.push_back({elems[pick_element(rng)], p});
        failures = 0;
      } else if (++failures > c.max_retries) {
        throw GenerationError("could not place atom " + std::to_string(mol.size()) + " of molecule " +
                              std::to_string(m) + " after " + std::to_string(c.max_retries) +
                              " attempts");
      }
    }
    out.push_back(std::move(mol));
  }
  return out;
}

namespace {

// Unit vectors of a regular tetrahedron.
const std::array<Vec3, 4>& tetrahedral() {
  static const std::array<Vec3, 4> dirs = {
      Vec3(1, 1, 1).normalized(), Vec3(1, -1, -1).normalized(), Vec3(-1, 1, -1).normalized(),
      Vec3(-1, -1, 1).normalized()};
  return dirs;
}

}  // namespace

Molecule water() {
  // O-H 0.9572 A, H-O-H 104.52 deg
  const double half = 104.52 / 2.0 * std::numbers::pi / 180.0;
  const double r = 0.9572;
  return Molecule{{{Element::O, Vec3(0, 0, 0)},
                   {Element::H, Vec3(r * std::sin(half), r * std::cos(half), 0)},
                   {Element::H, Vec3(-r * std::sin(half), r * std::cos(half), 0)}}};
}

Molecule methane() {
  // C-H 1.087 A, tetrahedral
  Molecule m{{{Element::C, Vec3::Zero()}}};
  for (const auto& d : tetrahedral()) m.atoms.push_back({Element::H, 1.087 * d});
  return m;
}

Molecule ethane() {
  // C-C 1.535 A, C-H 1.094 A, staggered, tetrahedral angles
  const double cc = 1.535, ch = 1.094;
  const double cos_t = -1.0 / 3.0;  // tetrahedral angle
  const double sin_t = std::sqrt(1.0 - cos_t * cos_t);
  Molecule m{{{Element::C, Vec3(0, 0, 0)}, {Element::C, Vec3(0, 0, cc)}}};
  for (int k = 0; k < 3; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / 3.0;
    // H on the first carbon points away from the second one.
    m.atoms.push_back({Element::H, Vec3(ch * sin_t * std::cos(phi), ch * sin_t * std::sin(phi), ch * cos_t)});
  }
  for (int k = 0; k < 3; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / 3.0 + std::numbers::pi / 3.0;
    m.atoms.push_back(
        {Element::H, Vec3(ch * sin_t * std::cos(phi), ch * sin_t * std::sin(phi), cc - ch * cos_t)});
  }
  return m;
}

}  // namespace voxgen
