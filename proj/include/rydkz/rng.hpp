// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rydkz {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from a master seed and an index path,
// e.g. (seed, repeat, beta index, alpha index). Deterministic and
// collision-resistant enough for disjoint Monte Carlo streams.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = master ^ 0x5bf0363546c95e27ULL;
  std::uint64_t out = splitmix64(s);
  for (std::uint64_t p : path) {
    s ^= p + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
    out = splitmix64(s);
  }
  return out;
}

// mt19937_64 with a fixed 53-bit uniform mapping. The standard pins the
// raw engine sequence; std::uniform_real_distribution does not, so the
// mapping is done here to keep byte-identical output across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rydkz
