// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rydkz/basis.hpp"
#include "rydkz/errors.hpp"
#include "rydkz/rng.hpp"
#include "rydkz/state.hpp"

namespace rydkz {

// Bitmask whose bit i flags n_i != n_{i+1}. Periodic chains include the
// wrap bond, open chains have L-1 bonds in bits 0..L-2.
inline bitmask_t unequal_bond_mask(bitmask_t s, int n_sites,
                                   Boundary boundary) {
  const bitmask_t mask =
      n_sites >= 64 ? ~0ULL : ((1ULL << n_sites) - 1);
  if (boundary == Boundary::periodic) {
    const bitmask_t rotated = ((s >> 1) | ((s & 1ULL) << (n_sites - 1))) & mask;
    return s ^ rotated;
  }
  return (s ^ (s >> 1)) & (mask >> 1);
}

inline int bond_count(int n_sites, Boundary boundary) {
  return boundary == Boundary::periodic ? n_sites : n_sites - 1;
}

// Number of bonds whose two sites agree ('00' or '11'): the defects of a
// perfectly alternating pattern.
inline int domain_wall_count(bitmask_t s, int n_sites, Boundary boundary) {
  return bond_count(n_sites, boundary) -
         std::popcount(unequal_bond_mask(s, n_sites, boundary));
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

inline Moments defect_moments(std::span<const cplx> amplitudes,
                              const ConstrainedBasis& basis) {
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    const double p = std::norm(amplitudes[i]);
    if (p == 0.0) continue;
    const double d =
        domain_wall_count(basis.states[i], basis.n_sites, basis.boundary);
    m1 += p * d;
    m2 += p * d * d;
  }
  return {m1, m2 - m1 * m1};
}

inline Moments defect_moments(const QuantumState& psi) {
  psi.validate();
  return defect_moments(std::span<const cplx>(psi.amplitudes), *psi.basis);
}

// Full probability mass function of the defect count.
struct DefectDistribution {
  std::map<int, double> pmf;
  double mean = 0.0;
  double var = 0.0;

  double odd_mass() const {
    double m = 0.0;
    for (const auto& [k, p] : pmf)
      if (k % 2 != 0) m += p;
    return m;
  }
};

inline DefectDistribution defect_distribution(std::span<const cplx> amplitudes,
                                              const ConstrainedBasis& basis) {
  DefectDistribution dist;
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    const double p = std::norm(amplitudes[i]);
    if (p == 0.0) continue;
    dist.pmf[domain_wall_count(basis.states[i], basis.n_sites,
                               basis.boundary)] += p;
  }
  double m1 = 0.0, m2 = 0.0;
  for (const auto& [k, p] : dist.pmf) {
    m1 += p * k;
    m2 += p * k * k;
  }
  dist.mean = m1;
  dist.var = m2 - m1 * m1;
  return dist;
}

inline DefectDistribution defect_distribution(const QuantumState& psi) {
  psi.validate();
  return defect_distribution(std::span<const cplx>(psi.amplitudes),
                             *psi.basis);
}

namespace detail {

// Site-averaged connected correlator of +/-1 variables read off a per-state
// bitmask: variable i is 2*bit_i - 1. Covers both occupation variables
// (mask = the state itself) and bond-agreement variables (mask = equal-bond
// mask) on the same footing.
template <class MaskFn>
inline std::vector<double> connected_pm_correlators(
    std::span<const cplx> amplitudes, const ConstrainedBasis& basis,
    int n_vars, bool wrap, int l_max, MaskFn&& mask_of) {
  if (l_max < 1) throw Error("correlator range must be at least 1");
  if (n_vars < 2) throw Error("correlators need at least two variables");
  const std::size_t nv = static_cast<std::size_t>(n_vars);
  std::vector<double> mean(nv, 0.0);
  std::vector<double> pair(nv * static_cast<std::size_t>(l_max), 0.0);

  for (std::size_t idx = 0; idx < amplitudes.size(); ++idx) {
    const double p = std::norm(amplitudes[idx]);
    if (p == 0.0) continue;
    const bitmask_t v = mask_of(basis.states[idx]);
    for (int i = 0; i < n_vars; ++i) {
      const double si = ((v >> i) & 1ULL) ? 1.0 : -1.0;
      mean[static_cast<std::size_t>(i)] += p * si;
      for (int l = 1; l <= l_max; ++l) {
        const int j = wrap ? (i + l) % n_vars : i + l;
        if (!wrap && j >= n_vars) break;
        const double sj = ((v >> j) & 1ULL) ? 1.0 : -1.0;
        pair[static_cast<std::size_t>(i) * l_max + (l - 1)] += p * si * sj;
      }
    }
  }

  std::vector<double> corr(static_cast<std::size_t>(l_max), 0.0);
  for (int l = 1; l <= l_max; ++l) {
    double acc = 0.0;
    int count = 0;
    for (int i = 0; i < n_vars; ++i) {
      const int j = wrap ? (i + l) % n_vars : i + l;
      if (!wrap && j >= n_vars) break;
      acc += pair[static_cast<std::size_t>(i) * l_max + (l - 1)] -
             mean[static_cast<std::size_t>(i)] *
                 mean[static_cast<std::size_t>(j)];
      ++count;
    }
    corr[static_cast<std::size_t>(l - 1)] =
        count > 0 ? acc / count : 0.0;
  }
  return corr;
}

}  // namespace detail

// Default largest separation kept in batch correlator output.
inline int default_corr_range(int n_vars, bool wrap) {
  return std::max(1, wrap ? n_vars / 2 : n_vars - 1);
}

// Connected occupation correlators c(l) = avg_i <m_i m_{i+l}> - <m_i><m_{i+l}>
// with m_i = 2 n_i - 1, for l = 1..l_max.
inline std::vector<double> density_correlators(std::span<const cplx> amplitudes,
                                               const ConstrainedBasis& basis,
                                               int l_max) {
  const bool wrap = basis.boundary == Boundary::periodic;
  if (l_max > (wrap ? basis.n_sites / 2 : basis.n_sites - 1))
    throw Error("correlator separation " + std::to_string(l_max) +
                " exceeds the usable range for " +
                std::to_string(basis.n_sites) + " sites");
  return detail::connected_pm_correlators(
      amplitudes, basis, basis.n_sites, wrap, l_max,
      [](bitmask_t s) { return s; });
}

inline std::vector<double> density_correlators(const QuantumState& psi,
                                               int l_max) {
  psi.validate();
  return density_correlators(std::span<const cplx>(psi.amplitudes), *psi.basis,
                             l_max);
}

// Connected bond correlators of w_i = 2 d_i - 1 where d_i flags an equal
// bond. Bond i sits between sites i and i+1.
inline std::vector<double> defect_correlators(std::span<const cplx> amplitudes,
                                              const ConstrainedBasis& basis,
                                              int l_max) {
  const bool wrap = basis.boundary == Boundary::periodic;
  const int nb = bond_count(basis.n_sites, basis.boundary);
  if (nb < 2) throw Error("defect correlators need at least two bonds");
  if (l_max > (wrap ? nb / 2 : nb - 1))
    throw Error("correlator separation " + std::to_string(l_max) +
                " exceeds the usable range for " + std::to_string(nb) +
                " bonds");
  const int L = basis.n_sites;
  const Boundary bc = basis.boundary;
  const bitmask_t all = basis.site_mask();
  return detail::connected_pm_correlators(
      amplitudes, basis, nb, wrap, l_max, [L, bc, all](bitmask_t s) {
        return static_cast<bitmask_t>(~unequal_bond_mask(s, L, bc)) & all;
      });
}

inline std::vector<double> defect_correlators(const QuantumState& psi,
                                              int l_max) {
  psi.validate();
  return defect_correlators(std::span<const cplx>(psi.amplitudes), *psi.basis,
                            l_max);
}

// Aggregated projective measurement record: distinct bitmasks with counts.
struct BitstringSample {
  int n_sites = 0;
  Boundary boundary = Boundary::periodic;
  std::uint64_t total_shots = 0;
  std::vector<std::pair<bitmask_t, std::uint64_t>> shots;  // sorted by mask

  void validate() const {
    std::uint64_t sum = 0;
    for (const auto& [mask, count] : shots) {
      if (count == 0) throw Error("sample contains a zero-count entry");
      sum += count;
    }
    if (sum != total_shots)
      throw Error("sample counts do not add up to the declared shot total");
  }
};

// Projective samples in the measurement basis, deterministic in the seed.
inline BitstringSample sample_bitstrings(const QuantumState& psi,
                                         std::uint64_t n_shots,
                                         std::uint64_t seed) {
  psi.validate();
  if (n_shots == 0) throw Error("sampling requires at least one shot");
  const std::size_t dim = psi.dim();
  std::vector<double> cdf(dim);
  double acc = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    acc += std::norm(psi.amplitudes[i]);
    cdf[i] = acc;
  }
  if (!(acc > 0.0)) throw Error("cannot sample a zero state");

  Rng rng(seed);
  std::map<bitmask_t, std::uint64_t> hist;
  for (std::uint64_t shot = 0; shot < n_shots; ++shot) {
    const double u = rng.uniform() * acc;
    const std::size_t i = static_cast<std::size_t>(
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    ++hist[psi.basis->states[std::min(i, dim - 1)]];
  }

  BitstringSample sample;
  sample.n_sites = psi.basis->n_sites;
  sample.boundary = psi.basis->boundary;
  sample.total_shots = n_shots;
  sample.shots.assign(hist.begin(), hist.end());
  return sample;
}

// Moments of the defect count estimated from shots, with standard errors.
// se_var uses the usual finite-sample variance-of-variance formula.
struct SampleMoments {
  double mean = 0.0;
  double var = 0.0;
  double se_mean = 0.0;
  double se_var = 0.0;
};

inline SampleMoments estimate_moments(const BitstringSample& sample) {
  sample.validate();
  const double n = static_cast<double>(sample.total_shots);
  if (sample.total_shots < 2)
    throw Error("moment estimation needs at least two shots");
  double m1 = 0.0;
  for (const auto& [mask, count] : sample.shots)
    m1 += static_cast<double>(count) *
          domain_wall_count(mask, sample.n_sites, sample.boundary);
  m1 /= n;
  double m2 = 0.0, m4 = 0.0;
  for (const auto& [mask, count] : sample.shots) {
    const double d =
        domain_wall_count(mask, sample.n_sites, sample.boundary) - m1;
    m2 += static_cast<double>(count) * d * d;
    m4 += static_cast<double>(count) * d * d * d * d;
  }
  m2 /= n;
  m4 /= n;
  SampleMoments out;
  out.mean = m1;
  out.var = m2 * n / (n - 1.0);
  out.se_mean = std::sqrt(std::max(0.0, out.var / n));
  out.se_var = std::sqrt(
      std::max(0.0, (m4 - m2 * m2 * (n - 3.0) / (n - 1.0)) / n));
  return out;
}

}  // namespace rydkz
