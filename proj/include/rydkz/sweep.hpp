// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rydkz/evolve.hpp"
#include "rydkz/hamiltonian.hpp"
#include "rydkz/observables.hpp"
#include "rydkz/state.hpp"
#include "rydkz/waveform.hpp"

namespace rydkz {

// Runs fn(0..n-1) on up to `workers` threads; results land wherever fn
// writes them (indexed slots), so output order never depends on timing.
template <class Fn>
inline void parallel_for(std::size_t n, int workers, Fn&& fn) {
  if (n == 0) return;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  std::size_t n_threads = workers > 0 ? static_cast<std::size_t>(workers)
                                      : static_cast<std::size_t>(hw);
  n_threads = std::min(n_threads, n);
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Chain description sufficient to build the basis, geometry, and drive.
struct SystemSpec {
  int n_sites = 0;
  double spacing_um = 6.2;
  Boundary boundary = Boundary::periodic;
  bool constrained = true;
  RydbergParams params;
  double t_edge_us = 0.5;
  double interaction_cutoff_um = 0.0;          // 0: no cutoff
  std::optional<AtomGeometry> geometry_override;

  AtomGeometry make_geometry() const {
    if (geometry_override) {
      if (static_cast<int>(geometry_override->size()) != n_sites)
        throw Error("geometry override has the wrong number of atoms");
      return *geometry_override;
    }
    return boundary == Boundary::periodic
               ? ring_geometry(n_sites, spacing_um)
               : chain_geometry(n_sites, spacing_um);
  }
};

// Geometric grid of ramp rates, inclusive of both endpoints.
inline std::vector<double> log_grid(double lo, double hi, int n_points) {
  if (!(lo > 0.0) || !(hi > lo)) throw Error("log grid needs 0 < lo < hi");
  if (n_points < 2) throw Error("log grid needs at least 2 points");
  std::vector<double> g(static_cast<std::size_t>(n_points));
  const double step = std::log(hi / lo) / (n_points - 1);
  for (int i = 0; i < n_points; ++i)
    g[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
  g.front() = lo;
  g.back() = hi;
  return g;
}

struct SweepPoint {
  double t_delta_us = 0.0;
  double rate_mhz_per_us = 0.0;
  bool ok = false;
  std::string error;
  Moments moments;
  DefectDistribution distribution;
  std::vector<double> density_corr;
  std::vector<double> defect_corr;
  StepStats stats;
  std::optional<QuantumState> final_state;
};

struct SweepOptions {
  int workers = 0;  // 0: hardware concurrency
  bool store_states = false;
  int corr_l_max = 0;  // 0: widest usable range
};

// Evolves the vacuum through the full sweep protocol once per ramp time.
// The basis is shared across points; each point gets its own protocol and
// Hamiltonian. A failed point carries its error message instead of data.
inline std::vector<SweepPoint> run_kz_sweep(const SystemSpec& spec,
                                            const std::vector<double>& t_deltas,
                                            const IntegratorConfig& integ,
                                            const SweepOptions& opts = {}) {
  if (t_deltas.empty()) throw Error("sweep needs at least one ramp time");
  auto basis = std::make_shared<ConstrainedBasis>(
      enumerate_basis(spec.n_sites, spec.boundary, spec.constrained));
  const AtomGeometry geometry = spec.make_geometry();

  std::vector<SweepPoint> points(t_deltas.size());
  parallel_for(t_deltas.size(), opts.workers, [&](std::size_t i) {
    SweepPoint& pt = points[i];
    pt.t_delta_us = t_deltas[i];
    try {
      pt.rate_mhz_per_us = sweep_rate_mhz_per_us(t_deltas[i], spec.params);
      const DriveProtocol proto =
          build_kz_protocol(t_deltas[i], spec.params, spec.t_edge_us);
      RydbergHamiltonian h(basis, geometry, spec.params, proto,
                           spec.interaction_cutoff_um);
      const QuantumState psi0 = vacuum_state(basis);
      SnapshotOptions snap;
      snap.correlators = false;
      EvolveResult res = evolve(h, psi0, 0.0, proto.duration, integ, {}, snap);

      const std::span<const cplx> amps(res.state.amplitudes);
      pt.moments = defect_moments(amps, *basis);
      pt.distribution = defect_distribution(amps, *basis);
      const int site_lmax =
          opts.corr_l_max > 0
              ? opts.corr_l_max
              : default_corr_range(spec.n_sites,
                                   spec.boundary == Boundary::periodic);
      pt.density_corr = density_correlators(amps, *basis, site_lmax);
      const int nb = bond_count(spec.n_sites, spec.boundary);
      if (nb >= 2)
        pt.defect_corr = defect_correlators(
            amps, *basis,
            std::min(site_lmax,
                     default_corr_range(nb, spec.boundary ==
                                                Boundary::periodic)));
      pt.stats = res.trajectory.stats;
      if (opts.store_states) pt.final_state = std::move(res.state);
      pt.ok = true;
    } catch (const std::exception& e) {
      pt.ok = false;
      pt.error = e.what();
    }
  });
  return points;
}

struct HoldRun {
  double t_delta_us = 0.0;
  double t_hold_us = 0.0;
  DriveProtocol protocol;
  std::vector<Snapshot> snapshots;  // sampled across the hold window
  StepStats stats;
  QuantumState final_state;  // after the closing edge
};

// Sweep followed by a hold at the final detuning, sampled uniformly from
// the end of the ramp to the end of the hold.
inline HoldRun run_hold(const SystemSpec& spec, double t_delta_us,
                        double t_hold_us, double sample_interval_us,
                        const IntegratorConfig& integ,
                        const SnapshotOptions& snap_opts = {}) {
  if (!(t_hold_us > 0.0)) throw Error("hold run needs a positive hold time");
  if (!(sample_interval_us > 0.0))
    throw Error("hold sampling interval must be positive");
  if (sample_interval_us > t_hold_us + 1e-12)
    throw Error("hold sampling interval exceeds the hold window");

  auto basis = std::make_shared<ConstrainedBasis>(
      enumerate_basis(spec.n_sites, spec.boundary, spec.constrained));
  const AtomGeometry geometry = spec.make_geometry();
  const DriveProtocol proto =
      build_hold_protocol(t_delta_us, t_hold_us, spec.params, spec.t_edge_us);
  RydbergHamiltonian h(basis, geometry, spec.params, proto,
                       spec.interaction_cutoff_um);

  std::vector<double> samples;
  const double t_start = proto.markers.ramp_end;
  const double t_end = *proto.markers.hold_end;
  for (double t = t_start; t <= t_end + 1e-9; t += sample_interval_us)
    samples.push_back(std::min(t, t_end));
  if (samples.size() < 2) throw Error("hold window yields fewer than 2 samples");

  const QuantumState psi0 = vacuum_state(basis);
  EvolveResult res =
      evolve(h, psi0, 0.0, proto.duration, integ, samples, snap_opts);

  HoldRun run;
  run.t_delta_us = t_delta_us;
  run.t_hold_us = t_hold_us;
  run.protocol = proto;
  run.snapshots = std::move(res.trajectory.snapshots);
  run.stats = res.trajectory.stats;
  run.final_state = std::move(res.state);
  return run;
}

}  // namespace rydkz
