// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "rydkz/errors.hpp"

namespace rydkz {

enum class Boundary { periodic, open };

inline const char* to_string(Boundary b) {
  return b == Boundary::periodic ? "periodic" : "open";
}

// Planar atom positions in micrometres plus the boundary convention used
// when interpreting "neighbouring" sites.
struct AtomGeometry {
  std::vector<std::array<double, 2>> positions_um;
  Boundary boundary = Boundary::periodic;

  std::size_t size() const { return positions_um.size(); }

  double distance_um(std::size_t j, std::size_t k) const {
    const double dx = positions_um[j][0] - positions_um[k][0];
    const double dy = positions_um[j][1] - positions_um[k][1];
    return std::hypot(dx, dy);
  }

  // Smallest pairwise distance; the relevant scale for interaction strength.
  double min_spacing_um() const {
    double best = 0.0;
    bool first = true;
    for (std::size_t j = 0; j < size(); ++j)
      for (std::size_t k = j + 1; k < size(); ++k) {
        const double d = distance_um(j, k);
        if (first || d < best) {
          best = d;
          first = false;
        }
      }
    return first ? 0.0 : best;
  }

  // All pairwise distances must be strictly positive.
  void validate() const {
    if (positions_um.empty()) throw Error("geometry has no atoms");
    for (std::size_t j = 0; j < size(); ++j)
      for (std::size_t k = j + 1; k < size(); ++k)
        if (distance_um(j, k) <= 0.0)
          throw Error("geometry has coincident atoms " + std::to_string(j) +
                      " and " + std::to_string(k));
  }
};

// Regular L-gon with side length a: neighbouring chord distance equals the
// lattice spacing, matching a closed chain of equally spaced atoms.
inline AtomGeometry ring_geometry(int n_sites, double spacing_um) {
  if (n_sites < 1) throw Error("ring geometry needs at least one site");
  if (spacing_um <= 0.0) throw Error("lattice spacing must be positive");
  AtomGeometry g;
  g.boundary = Boundary::periodic;
  g.positions_um.resize(static_cast<std::size_t>(n_sites));
  if (n_sites == 1) {
    g.positions_um[0] = {0.0, 0.0};
    return g;
  }
  const double radius =
      spacing_um / (2.0 * std::sin(std::numbers::pi / n_sites));
  for (int j = 0; j < n_sites; ++j) {
    const double phi = 2.0 * std::numbers::pi * j / n_sites;
    g.positions_um[static_cast<std::size_t>(j)] = {radius * std::cos(phi),
                                                   radius * std::sin(phi)};
  }
  return g;
}

// Straight line of equally spaced atoms.
inline AtomGeometry chain_geometry(int n_sites, double spacing_um) {
  if (n_sites < 1) throw Error("chain geometry needs at least one site");
  if (spacing_um <= 0.0) throw Error("lattice spacing must be positive");
  AtomGeometry g;
  g.boundary = Boundary::open;
  g.positions_um.resize(static_cast<std::size_t>(n_sites));
  for (int j = 0; j < n_sites; ++j)
    g.positions_um[static_cast<std::size_t>(j)] = {spacing_um * j, 0.0};
  return g;
}

}  // namespace rydkz
