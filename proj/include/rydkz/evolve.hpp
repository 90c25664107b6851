// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "rydkz/hamiltonian.hpp"
#include "rydkz/integrator.hpp"
#include "rydkz/observables.hpp"
#include "rydkz/state.hpp"

namespace rydkz {

// Observables recorded at one sample time.
struct Snapshot {
  double t_us = 0.0;
  double mean_defects = 0.0;
  double var_defects = 0.0;
  double energy = 0.0;  // <H>/hbar, rad/us
  // Largest per-step norm deviation seen since the previous snapshot.
  double norm_deviation = 0.0;
  std::vector<double> density_corr;  // l = 1..l_max
  std::vector<double> defect_corr;   // l = 1..l_max
};

struct SnapshotOptions {
  bool correlators = true;
  int corr_l_max = 0;  // 0: widest usable range
  bool store_states = false;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  std::vector<QuantumState> states;  // filled only when requested
  StepStats stats;
};

struct EvolveResult {
  QuantumState state;
  Trajectory trajectory;
};

// Schroedinger evolution d psi/dt = -i (H(t)/hbar) psi over [t0, t1].
//
// The mean diagonal c(t) = mean_V - delta(t) mean_n is subtracted from the
// generator while integrating and its exact accumulated phase (the detuning
// waveform integral is closed-form for piecewise-linear ramps) is restored
// at every checkpoint, so the integrator only resolves the spectral spread,
// not the mean energy. Accepted steps are renormalized; the per-step norm
// deviations are recorded as a diagnostic, never hidden.
inline EvolveResult evolve(const RydbergHamiltonian& h,
                           const QuantumState& psi0, double t0, double t1,
                           const IntegratorConfig& cfg,
                           std::vector<double> sample_times = {},
                           const SnapshotOptions& opts = {}) {
  psi0.validate();
  if (psi0.basis.get() != h.basis_ptr().get())
    throw Error("state and hamiltonian use different bases");
  if (!(t1 >= t0)) throw IntegrationError("evolve needs t1 >= t0");

  std::sort(sample_times.begin(), sample_times.end());
  for (double ts : sample_times)
    if (ts < t0 - 1e-12 || ts > t1 + 1e-12)
      throw Error("sample time " + std::to_string(ts) +
                  " outside the evolution window");

  // Checkpoints: waveform breakpoints and sample times, deduplicated, so
  // every integration interval has a smooth drive and snapshots land on
  // exact times.
  std::vector<double> checkpoints;
  for (double ts : h.protocol().segment_times())
    if (ts > t0 + 1e-12 && ts < t1 - 1e-12) checkpoints.push_back(ts);
  for (double ts : sample_times)
    if (ts > t0 + 1e-12 && ts < t1 - 1e-12) checkpoints.push_back(ts);
  checkpoints.push_back(t1);
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(
      std::unique(checkpoints.begin(), checkpoints.end(),
                  [](double a, double b) { return std::abs(a - b) < 1e-12; }),
      checkpoints.end());

  const ConstrainedBasis& basis = h.basis();
  const bool want_corr = opts.correlators && basis.n_sites >= 3;
  const int site_lmax =
      opts.corr_l_max > 0
          ? opts.corr_l_max
          : default_corr_range(basis.n_sites,
                               basis.boundary == Boundary::periodic);
  const int nb = bond_count(basis.n_sites, basis.boundary);
  const int bond_lmax =
      nb >= 2 ? std::min(site_lmax, default_corr_range(
                                        nb, basis.boundary ==
                                                Boundary::periodic))
              : 0;

  EvolveResult result;
  result.state.basis = h.basis_ptr();
  cvec y = psi0.amplitudes;

  double max_dev_since_snapshot = 0.0;
  auto take_snapshot = [&](double t) {
    Snapshot snap;
    snap.t_us = t;
    const auto m = defect_moments(std::span<const cplx>(y), basis);
    snap.mean_defects = m.mean;
    snap.var_defects = m.var;
    snap.energy = h.expectation_energy(t, y);
    snap.norm_deviation = max_dev_since_snapshot;
    max_dev_since_snapshot = 0.0;
    if (want_corr) {
      snap.density_corr =
          density_correlators(std::span<const cplx>(y), basis, site_lmax);
      if (bond_lmax >= 1)
        snap.defect_corr =
            defect_correlators(std::span<const cplx>(y), basis, bond_lmax);
    }
    result.trajectory.snapshots.push_back(std::move(snap));
    if (opts.store_states) {
      QuantumState copy;
      copy.basis = h.basis_ptr();
      copy.amplitudes = y;
      result.trajectory.states.push_back(std::move(copy));
    }
  };

  double last_snapshot_t = t0 - 1.0;
  auto is_sample_time = [&](double t) {
    if (std::abs(t - last_snapshot_t) < 1e-12) return false;
    auto it = std::lower_bound(sample_times.begin(), sample_times.end(),
                               t - 1e-12);
    return it != sample_times.end() && std::abs(*it - t) < 1e-12;
  };

  if (is_sample_time(t0)) {
    take_snapshot(t0);
    last_snapshot_t = t0;
  }

  StepStats& stats = result.trajectory.stats;
  double h_next = 1e-4;
  double t_prev = t0;

  for (double t_next : checkpoints) {
    auto rhs = [&](double t, const cvec& yin, cvec& dydt) {
      const double tt = std::clamp(t, t_prev, t_next);
      const double delta = h.protocol().delta(tt);
      h.apply_fixed<cplx>(h.protocol().omega(tt), delta, yin, dydt,
                          h.mean_diagonal(delta));
      for (cplx& v : dydt) v = cplx(v.imag(), -v.real());  // times -i
    };
    auto post_step = [&](double, cvec& yy) {
      double ns = 0.0;
      for (const cplx& a : yy) ns += std::norm(a);
      const double nrm = std::sqrt(ns);
      const double dev = std::abs(nrm - 1.0);
      max_dev_since_snapshot = std::max(max_dev_since_snapshot, dev);
      stats.max_norm_deviation = std::max(stats.max_norm_deviation, dev);
      const double inv = 1.0 / nrm;
      for (cplx& a : yy) a *= inv;
    };
    integrate_interval(rhs, y, t_prev, t_next, cfg, stats, h_next, post_step);

    const double theta =
        h.mean_interaction() * (t_next - t_prev) -
        h.mean_occupation() * h.protocol().delta.integral(t_prev, t_next);
    const cplx phase = std::polar(1.0, -theta);
    for (cplx& a : y) a *= phase;

    if (is_sample_time(t_next)) {
      take_snapshot(t_next);
      last_snapshot_t = t_next;
    }
    t_prev = t_next;
  }

  result.state.amplitudes = std::move(y);
  return result;
}

}  // namespace rydkz
