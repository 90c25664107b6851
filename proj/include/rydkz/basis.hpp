// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rydkz/errors.hpp"
#include "rydkz/geometry.hpp"

namespace rydkz {

using bitmask_t = std::uint64_t;

// Site j is bit j of the mask; bit value 1 marks the excited state.
// "Constrained" bans simultaneous excitation of neighbouring sites,
// including the wrap-around pair on periodic chains. On a one-site
// periodic chain the wrap pair is the site with itself, so the excited
// state is excluded there as well.
inline bool blockade_allowed(bitmask_t s, int n_sites, Boundary boundary,
                             bool constrained) {
  if (!constrained) return true;
  if (s & (s >> 1)) return false;
  if (boundary == Boundary::periodic && n_sites >= 1) {
    if ((s & 1ULL) && ((s >> (n_sites - 1)) & 1ULL)) return false;
  }
  return true;
}

// Enumerated computational basis of an L-site chain, sorted by bitmask
// value so that positions are reproducible and lookup is a binary search.
struct ConstrainedBasis {
  int n_sites = 0;
  Boundary boundary = Boundary::periodic;
  bool constrained = true;
  std::vector<bitmask_t> states;

  std::size_t dim() const { return states.size(); }

  bitmask_t site_mask() const {
    return n_sites >= 64 ? ~0ULL : ((1ULL << n_sites) - 1);
  }

  std::optional<std::size_t> try_index_of(bitmask_t s) const {
    if (s > site_mask()) return std::nullopt;
    if (!constrained) return static_cast<std::size_t>(s);
    auto it = std::lower_bound(states.begin(), states.end(), s);
    if (it == states.end() || *it != s) return std::nullopt;
    return static_cast<std::size_t>(it - states.begin());
  }

  std::size_t index_of(bitmask_t s) const {
    auto idx = try_index_of(s);
    if (!idx)
      throw NotInBasisError("bitmask " + std::to_string(s) +
                            " is not a basis state of this " +
                            std::to_string(n_sites) + "-site space");
    return *idx;
  }
};

// Enumeration walks all 2^L masks, so capacity is capped where the scan or
// the resulting state vector would stop being a desk-scale object.
inline ConstrainedBasis enumerate_basis(int n_sites, Boundary boundary,
                                        bool constrained) {
  if (n_sites < 1) throw Error("basis needs at least one site");
  const int cap = constrained ? 26 : 20;
  if (n_sites > cap)
    throw CapacityError("basis enumeration capped at " + std::to_string(cap) +
                        " sites for " +
                        (constrained ? std::string("constrained")
                                     : std::string("unconstrained")) +
                        " spaces, got " + std::to_string(n_sites));
  ConstrainedBasis basis;
  basis.n_sites = n_sites;
  basis.boundary = boundary;
  basis.constrained = constrained;
  const bitmask_t end = 1ULL << n_sites;
  for (bitmask_t s = 0; s < end; ++s)
    if (blockade_allowed(s, n_sites, boundary, constrained))
      basis.states.push_back(s);
  return basis;
}

}  // namespace rydkz
