// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace voxgen {

using Vec3 = Eigen::Vector3d;

enum class Element { H, C, N, O, F, S, Cl, Br };

inline constexpr std::array<Element, 8> kAllElements = {
    Element::H, Element::C, Element::N, Element::O,
    Element::F, Element::S, Element::Cl, Element::Br};

std::string_view symbol(Element e);

/// Case-sensitive lookup ("Cl", not "CL"). Returns nullopt for anything
/// outside the supported set.
std::optional<Element> element_from_symbol(std::string_view sym);

/// Ordered element list of a dataset; an element's channel index is its
/// position in the list.
class ElementSet {
 public:
  ElementSet() = default;
  explicit ElementSet(std::vector<Element> elements);

  /// "C,H,O,N,F" style list.
  static ElementSet parse(std::string_view csv);
  /// The 8-element set C, H, O, N, F, S, Cl, Br.
  static ElementSet full();

  std::size_t size() const noexcept { return elements_.size(); }
  Element at(std::size_t channel) const { return elements_.at(channel); }
  std::optional<std::size_t> channel_of(Element e) const;
  const std::vector<Element>& elements() const noexcept { return elements_; }
  std::string to_string() const;

  bool operator==(const ElementSet&) const = default;

 private:
  std::vector<Element> elements_;
};

struct Atom {
  Element element;
  Vec3 position;
};

struct Molecule {
  std::vector<Atom> atoms;

  std::size_t size() const noexcept { return atoms.size(); }
  bool empty() const noexcept { return atoms.empty(); }

  /// Unweighted mean of atom positions. Zero for an empty molecule.
  Vec3 centroid() const;
  Molecule translated(const Vec3& shift) const;
  bool all_finite() const;
};

}  // namespace voxgen
