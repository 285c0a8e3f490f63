// SPDX-License-Identifier: Apache-2.0
#include "voxgen/molecule.hpp"

#include "voxgen/errors.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace voxgen {

std::string_view symbol(Element e) {
  switch (e) {
    case Element::H: return "H";
    case Element::C: return "C";
    case Element::N: return "N";
    case Element::O: return "O";
    case Element::F: return "F";
    case Element::S: return "S";
    case Element::Cl: return "Cl";
    case Element::Br: return "Br";
  }
  return "?";
}

std::optional<Element> element_from_symbol(std::string_view sym) {
  for (Element e : kAllElements) {
    if (symbol(e) == sym) return e;
  }
  return std::nullopt;
}

ElementSet::ElementSet(std::vector<Element> elements) : elements_(std::move(elements)) {
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    for (std::size_t j = i + 1; j < elements_.size(); ++j) {
      if (elements_[i] == elements_[j]) {
        throw InvalidArgument("duplicate element " + std::string(symbol(elements_[i])) +
                              " in element set");
      }
    }
  }
}

ElementSet ElementSet::parse(std::string_view csv) {
  std::vector<Element> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto end = csv.find(',', start);
    if (end == std::string_view::npos) end = csv.size();
    auto tok = csv.substr(start, end - start);
    while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.front()))) tok.remove_prefix(1);
    while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.back()))) tok.remove_suffix(1);
    if (!tok.empty()) {
      auto e = element_from_symbol(tok);
      if (!e) throw InvalidArgument("unknown element '" + std::string(tok) + "'");
      out.push_back(*e);
    }
    start = end + 1;
  }
  if (out.empty()) throw InvalidArgument("element set is empty");
  return ElementSet(std::move(out));
}

ElementSet ElementSet::full() {
  return ElementSet({Element::C, Element::H, Element::O, Element::N, Element::F,
                     Element::S, Element::Cl, Element::Br});
}

std::optional<std::size_t> ElementSet::channel_of(Element e) const {
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    if (elements_[i] == e) return i;
  }
  return std::nullopt;
}

std::string ElementSet::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    if (i) os << ',';
    os << symbol(elements_[i]);
  }
  return os.str();
}

Vec3 Molecule::centroid() const {
  Vec3 c = Vec3::Zero();
  if (atoms.empty()) return c;
  for (const auto& a : atoms) c += a.position;
  return c / static_cast<double>(atoms.size());
}

Molecule Molecule::translated(const Vec3& shift) const {
  Molecule out = *this;
  for (auto& a : out.atoms) a.position += shift;
  return out;
}

bool Molecule::all_finite() const {
  for (const auto& a : atoms) {
    if (!a.position.allFinite()) return false;
  }
  return true;
}

}  // namespace voxgen
