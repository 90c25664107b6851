// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rydkz/analysis.hpp"
#include "rydkz/errors.hpp"
#include "rydkz/observables.hpp"
#include "rydkz/rng.hpp"

namespace rydkz {

// Asymmetric single-bit readout flip rates with calibration uncertainties:
// eps10 = P(read 0 | prepared 1), eps01 = P(read 1 | prepared 0).
struct ReadoutModel {
  double eps10 = 0.0;
  double eps01 = 0.0;
  double d_eps10 = 0.0;
  double d_eps01 = 0.0;

  void validate() const {
    if (eps10 < 0.0 || eps01 < 0.0 || eps10 > 1.0 || eps01 > 1.0)
      throw MitigationError("readout flip rates must lie in [0, 1]");
    if (eps10 + eps01 >= 1.0)
      throw MitigationError("readout model is not invertible: eps10 + eps01 >= 1");
    if (d_eps10 < 0.0 || d_eps01 < 0.0)
      throw MitigationError("readout rate uncertainties must be nonnegative");
  }
};

// Applies independent per-bit flips to every shot. Forward simulation of
// the readout channel; deterministic in the seed.
inline BitstringSample apply_readout_noise(const BitstringSample& sample,
                                           double eps01, double eps10,
                                           std::uint64_t seed) {
  sample.validate();
  if (eps01 < 0.0 || eps01 > 1.0 || eps10 < 0.0 || eps10 > 1.0)
    throw MitigationError("flip probabilities must lie in [0, 1]");
  Rng rng(seed);
  std::map<bitmask_t, std::uint64_t> hist;
  const int L = sample.n_sites;
  for (const auto& [mask, count] : sample.shots) {
    for (std::uint64_t c = 0; c < count; ++c) {
      bitmask_t out = mask;
      for (int j = 0; j < L; ++j) {
        const bool one = (mask >> j) & 1ULL;
        const double p = one ? eps10 : eps01;
        if (rng.uniform() < p) out ^= (1ULL << j);
      }
      ++hist[out];
    }
  }
  BitstringSample noisy = sample;
  noisy.shots.assign(hist.begin(), hist.end());
  return noisy;
}

// Extra flip channel that, composed after a channel with true rates
// (eps01, eps10), yields target rates (alpha*eps01, beta*eps10). Derived
// from M_extra = M_target M_true^{-1}; both columns must stay stochastic.
struct AmplifyChannel {
  double q01 = 0.0;
  double q10 = 0.0;
};

inline AmplifyChannel amplification_channel(const ReadoutModel& model,
                                            double alpha, double beta) {
  model.validate();
  const double a = model.eps01;
  const double b = model.eps10;
  if (alpha < 1.0 || beta < 1.0)
    throw MitigationError("amplification factors must be at least 1");
  if (alpha * a > 1.0 || beta * b > 1.0)
    throw MitigationError("amplified flip rate exceeds 1");
  const double denom = 1.0 - a - b;
  AmplifyChannel ch;
  ch.q01 = a * (alpha - 1.0 + b * (beta - alpha)) / denom;
  ch.q10 = b * (beta - 1.0 + a * (alpha - beta)) / denom;
  if (ch.q01 < -1e-12 || ch.q10 < -1e-12 || ch.q01 > 1.0 || ch.q10 > 1.0)
    throw MitigationError("amplification target is not reachable by an extra "
                          "flip channel");
  ch.q01 = std::max(ch.q01, 0.0);
  ch.q10 = std::max(ch.q10, 0.0);
  return ch;
}

enum class WallObservable { mean, variance };
enum class ExtrapOrder { linear, quadratic };

struct ZNEGrid {
  std::vector<double> alphas{1.0, 2.0, 3.0};
  std::vector<double> betas{1.0, 1.5, 2.0};
  int repeats = 4;
  std::uint64_t seed = 0;

  void validate() const {
    if (alphas.empty() || betas.empty())
      throw MitigationError("amplification grid must be nonempty");
    for (double a : alphas)
      if (a < 1.0) throw MitigationError("amplification factors must be >= 1");
    for (double b : betas)
      if (b < 1.0) throw MitigationError("amplification factors must be >= 1");
    if (repeats < 1) throw MitigationError("grid repeats must be >= 1");
  }
};

struct ZNEPoint {
  double alpha = 0.0;
  double beta = 0.0;
  double eps01 = 0.0;  // amplified rates at this point
  double eps10 = 0.0;
  double value = 0.0;  // averaged over repeats
  double stat_err = 0.0;
};

struct ZNEIntermediate {
  double beta = 0.0;
  double eps10 = 0.0;
  double value = 0.0;  // zero-eps01 intercept at this beta
  double stat_err = 0.0;
};

struct ZNEResult {
  double value = 0.0;
  double stat_err = 0.0;
  double sys_err = 0.0;  // filled by systematic_error
  WallObservable observable = WallObservable::mean;
  ExtrapOrder order = ExtrapOrder::linear;
  std::vector<ZNEPoint> grid;
  std::vector<ZNEIntermediate> intermediates;
  double residual_norm = 0.0;  // weighted RMS of the final extrapolation
  std::vector<std::string> warnings;
};

namespace detail {

inline std::pair<double, double> wall_observable(const BitstringSample& s,
                                                 WallObservable obs) {
  const SampleMoments m = estimate_moments(s);
  return obs == WallObservable::mean ? std::pair{m.mean, m.se_mean}
                                     : std::pair{m.var, m.se_var};
}

// Weighted mean with propagated error; the degenerate-abscissa fallback of
// both extrapolation steps.
inline std::pair<double, double> weighted_mean(std::span<const double> y,
                                               std::span<const double> s) {
  double wsum = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double sig = std::max(std::abs(s[i]), 1e-12);
    const double w = 1.0 / (sig * sig);
    wsum += w;
    acc += w * y[i];
  }
  return {acc / wsum, std::sqrt(1.0 / wsum)};
}

inline bool distinct_count_at_least(std::span<const double> xs, int k) {
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  int distinct = v.empty() ? 0 : 1;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1] + 1e-12) ++distinct;
  return distinct >= k;
}

}  // namespace detail

// Zero-noise extrapolation of a defect-count observable: amplify both flip
// rates over a grid by composed resampling channels, then extrapolate to
// zero in two steps (first the 0->1 rate at fixed beta, then the 1->0 rate).
inline ZNEResult zne_mitigate(const BitstringSample& sample,
                              const ReadoutModel& model, const ZNEGrid& grid,
                              WallObservable obs = WallObservable::mean,
                              ExtrapOrder order = ExtrapOrder::linear) {
  sample.validate();
  model.validate();
  grid.validate();

  const bool have01 = model.eps01 > 0.0;
  const bool have10 = model.eps10 > 0.0;
  if (have01 && !detail::distinct_count_at_least(grid.alphas, 2))
    throw MitigationError("grid needs at least 2 distinct alpha factors to "
                          "extrapolate the 0->1 rate");
  const int need_beta = order == ExtrapOrder::quadratic ? 3 : 2;
  if (have10 && !detail::distinct_count_at_least(grid.betas, need_beta))
    throw MitigationError("grid needs at least " + std::to_string(need_beta) +
                          " distinct beta factors for this extrapolation order");

  ZNEResult result;
  result.observable = obs;
  result.order = order;

  // Repeat-averaged observable at every grid point. The unamplified point
  // is the measured data itself and is never resampled.
  std::vector<std::vector<double>> values(grid.betas.size());
  std::vector<std::vector<double>> errors(grid.betas.size());
  for (std::size_t bi = 0; bi < grid.betas.size(); ++bi) {
    values[bi].resize(grid.alphas.size());
    errors[bi].resize(grid.alphas.size());
    for (std::size_t ai = 0; ai < grid.alphas.size(); ++ai) {
      const double alpha = grid.alphas[ai];
      const double beta = grid.betas[bi];
      double vsum = 0.0, esum = 0.0;
      if (alpha == 1.0 && beta == 1.0) {
        const auto [v, e] = detail::wall_observable(sample, obs);
        vsum = v;
        esum = e;
      } else {
        const AmplifyChannel ch = amplification_channel(model, alpha, beta);
        double vacc = 0.0, eacc = 0.0;
        for (int r = 0; r < grid.repeats; ++r) {
          const std::uint64_t s = derive_seed(
              grid.seed, {static_cast<std::uint64_t>(r), bi, ai});
          const BitstringSample noisy =
              apply_readout_noise(sample, ch.q01, ch.q10, s);
          const auto [v, e] = detail::wall_observable(noisy, obs);
          vacc += v;
          eacc += e;
        }
        vsum = vacc / grid.repeats;
        esum = eacc / grid.repeats;
      }
      values[bi][ai] = vsum;
      errors[bi][ai] = esum;
      result.grid.push_back({alpha, beta, alpha * model.eps01,
                             beta * model.eps10, vsum, esum});
    }
  }

  // Step 1: per beta, extrapolate the 0->1 rate to zero.
  std::vector<double> mid_x, mid_y, mid_s;
  for (std::size_t bi = 0; bi < grid.betas.size(); ++bi) {
    double v, e;
    if (!have01) {
      std::tie(v, e) = detail::weighted_mean(values[bi], errors[bi]);
    } else {
      std::vector<double> xs(grid.alphas.size());
      for (std::size_t ai = 0; ai < grid.alphas.size(); ++ai)
        xs[ai] = grid.alphas[ai] * model.eps01;
      const auto fit = detail::wls_polyfit(xs, values[bi], errors[bi], 1);
      v = fit.coef[0];
      e = std::sqrt(std::max(0.0, fit.cov[0]));
    }
    mid_x.push_back(grid.betas[bi] * model.eps10);
    mid_y.push_back(v);
    mid_s.push_back(e);
    result.intermediates.push_back({grid.betas[bi], mid_x.back(), v, e});
  }

  // Step 2: extrapolate the 1->0 rate to zero.
  if (!have10) {
    const auto [v, e] = detail::weighted_mean(mid_y, mid_s);
    result.value = v;
    result.stat_err = e;
  } else {
    const int ord = order == ExtrapOrder::quadratic ? 2 : 1;
    const auto fit = detail::wls_polyfit(mid_x, mid_y, mid_s, ord);
    result.value = fit.coef[0];
    result.stat_err = std::sqrt(std::max(0.0, fit.cov[0]));
    result.residual_norm = fit.weighted_rms;
  }
  return result;
}

// Calibration systematic: rerun the full extrapolation with each flip rate
// shifted by its uncertainty and report the largest deviation. One rate at
// a time by default; `corners` shifts both together.
inline double systematic_error(const BitstringSample& sample,
                               const ReadoutModel& model, const ZNEGrid& grid,
                               WallObservable obs = WallObservable::mean,
                               ExtrapOrder order = ExtrapOrder::linear,
                               bool corners = false) {
  model.validate();
  const double baseline = zne_mitigate(sample, model, grid, obs, order).value;
  auto shifted_value = [&](double e10, double e01) {
    ReadoutModel m = model;
    m.eps10 = std::clamp(e10, 0.0, 1.0);
    m.eps01 = std::clamp(e01, 0.0, 1.0);
    if (m.eps10 + m.eps01 >= 1.0)
      throw MitigationError("shifted readout model is not invertible");
    return zne_mitigate(sample, m, grid, obs, order).value;
  };
  double worst = 0.0;
  std::vector<std::pair<double, double>> variants;
  if (corners) {
    for (double s10 : {-1.0, 1.0})
      for (double s01 : {-1.0, 1.0})
        variants.emplace_back(model.eps10 + s10 * model.d_eps10,
                              model.eps01 + s01 * model.d_eps01);
  } else {
    variants = {{model.eps10 + model.d_eps10, model.eps01},
                {model.eps10 - model.d_eps10, model.eps01},
                {model.eps10, model.eps01 + model.d_eps01},
                {model.eps10, model.eps01 - model.d_eps01}};
  }
  for (const auto& [e10, e01] : variants)
    worst = std::max(worst, std::abs(shifted_value(e10, e01) - baseline));
  return worst;
}

// Measured joint outcome frequencies of each neighbouring pair of sites:
// index 2*x_i + x_j for the bond (i, j).
inline std::vector<std::array<double, 4>> bond_joint_frequencies(
    const BitstringSample& sample) {
  sample.validate();
  const int nb = bond_count(sample.n_sites, sample.boundary);
  if (nb < 1) throw Error("sample has no bonds");
  std::vector<std::array<double, 4>> joints(
      static_cast<std::size_t>(nb), {0.0, 0.0, 0.0, 0.0});
  for (const auto& [mask, count] : sample.shots) {
    const double w = static_cast<double>(count) /
                     static_cast<double>(sample.total_shots);
    for (int i = 0; i < nb; ++i) {
      const int j = (i + 1) % sample.n_sites;
      const int xi = static_cast<int>((mask >> i) & 1ULL);
      const int xj = static_cast<int>((mask >> j) & 1ULL);
      joints[static_cast<std::size_t>(i)]
            [static_cast<std::size_t>(2 * xi + xj)] += w;
    }
  }
  return joints;
}

// True-state wall probability of one bond from its measured joint, by
// inverting the tensor product of the single-bit confusion matrix.
inline double corrected_wall_prob(const std::array<double, 4>& measured,
                                  const ReadoutModel& model) {
  model.validate();
  const double a = model.eps01;
  const double b = model.eps10;
  const double inv_det = 1.0 / (1.0 - a - b);
  // Minv[t][x]: rows true bit, columns measured bit.
  const double minv[2][2] = {{(1.0 - b) * inv_det, -b * inv_det},
                             {-a * inv_det, (1.0 - a) * inv_det}};
  double wall = 0.0;
  for (int ti = 0; ti < 2; ++ti)
    for (int tj = 0; tj < 2; ++tj) {
      if (ti != tj) continue;  // wall means equal bits
      double p = 0.0;
      for (int xi = 0; xi < 2; ++xi)
        for (int xj = 0; xj < 2; ++xj)
          p += minv[ti][xi] * minv[tj][xj] *
               measured[static_cast<std::size_t>(2 * xi + xj)];
      wall += p;
    }
  return wall;
}

// Mean defect count corrected by per-bond confusion-matrix inversion; the
// linear-algebra baseline the extrapolation is checked against.
inline double confusion_inverse_mean(const BitstringSample& sample,
                                     const ReadoutModel& model) {
  const auto joints = bond_joint_frequencies(sample);
  double mean = 0.0;
  for (const auto& joint : joints) mean += corrected_wall_prob(joint, model);
  return mean;
}

}  // namespace rydkz
