// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rydkz/analysis.hpp"
#include "rydkz/evolve.hpp"
#include "rydkz/io.hpp"
#include "rydkz/lanczos.hpp"
#include "rydkz/mitigation.hpp"
#include "rydkz/sweep.hpp"
#include "rydkz/version.hpp"

namespace rydkz {

// ---- configuration -------------------------------------------------------

struct AnalysisConfig {
  int corr_lo = 1;
  int corr_hi = 6;
  std::optional<std::pair<double, double>> power_window;  // rate window
  double size_rescale = 1.0;
  Detrend detrend = Detrend::mean;
  int detrend_window = 0;  // running-mean width in samples; 0 picks n/8
  Taper taper = Taper::rectangular;
};

struct SweepProtocolConfig {
  std::vector<double> t_deltas_us;
};

struct HoldProtocolConfig {
  double t_delta_us = 0.0;
  double t_hold_us = 0.0;
  double sample_interval_us = 0.01;
};

struct CampaignConfig {
  SystemSpec system;
  std::optional<SweepProtocolConfig> sweep;
  std::optional<HoldProtocolConfig> hold;
  IntegratorConfig integrator;
  AnalysisConfig analysis;
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  int workers = 0;
  bool store_states = false;
  std::string hash;  // stable digest of the loaded document
  json document;
};

inline SystemSpec system_from_json(const json& j) {
  const std::string ctx = "config.system";
  SystemSpec spec;
  spec.n_sites = field_as<int>(j, "L", ctx);
  if (spec.n_sites < 1) throw SchemaError("field 'L' in " + ctx + " must be >= 1");
  spec.spacing_um = field_as<double>(j, "a_um", ctx);
  if (!(spec.spacing_um > 0.0))
    throw SchemaError("field 'a_um' in " + ctx + " must be positive");
  spec.boundary =
      boundary_from_string(field_as<std::string>(j, "boundary", ctx), ctx);
  spec.constrained = field_as<bool>(j, "constrained", ctx);
  spec.params = RydbergParams::from_linear_mhz(
      field_as<double>(j, "C6_over_2pi_MHz_um6", ctx),
      field_as<double>(j, "omega_max_over_2pi_MHz", ctx),
      field_as<double>(j, "delta_min_over_2pi_MHz", ctx),
      field_as<double>(j, "delta_max_over_2pi_MHz", ctx));
  spec.params.validate();
  spec.t_edge_us = field_or<double>(j, "t_edge_us", 0.5);
  if (!(spec.t_edge_us > 0.0))
    throw SchemaError("field 't_edge_us' in " + ctx + " must be positive");
  spec.interaction_cutoff_um =
      field_or<double>(j, "interaction_cutoff_um", 0.0);
  if (auto it = j.find("geometry_file"); it != j.end() && !it->is_null()) {
    const auto path = it->get<std::string>();
    spec.geometry_override = geometry_from_json(load_json_file(path));
  }
  return spec;
}

inline AnalysisConfig analysis_from_json(const json& j) {
  AnalysisConfig cfg;
  if (!j.is_object()) return cfg;
  if (auto it = j.find("corr_window"); it != j.end()) {
    if (!it->is_array() || it->size() != 2)
      throw SchemaError("field 'corr_window' in config.analysis must be "
                        "[lo, hi]");
    cfg.corr_lo = (*it)[0].get<int>();
    cfg.corr_hi = (*it)[1].get<int>();
    if (cfg.corr_lo < 1 || cfg.corr_hi < cfg.corr_lo)
      throw SchemaError("field 'corr_window' in config.analysis is not a "
                        "valid window");
  }
  if (auto it = j.find("power_law_window_mhz_per_us"); it != j.end()) {
    if (!it->is_array() || it->size() != 2)
      throw SchemaError("field 'power_law_window_mhz_per_us' must be "
                        "[lo, hi]");
    cfg.power_window = {{(*it)[0].get<double>(), (*it)[1].get<double>()}};
  }
  cfg.size_rescale = field_or<double>(j, "size_rescale", 1.0);
  if (!(cfg.size_rescale > 0.0))
    throw SchemaError("field 'size_rescale' in config.analysis must be "
                      "positive");
  const std::string detrend = field_or<std::string>(j, "detrend", "mean");
  if (detrend == "mean")
    cfg.detrend = Detrend::mean;
  else if (detrend == "running_mean")
    cfg.detrend = Detrend::running_mean;
  else if (detrend == "none")
    cfg.detrend = Detrend::none;
  else
    throw SchemaError("field 'detrend' in config.analysis must be one of "
                      "\"mean\", \"running_mean\", \"none\"");
  cfg.detrend_window = field_or<int>(j, "detrend_window", 0);
  if (cfg.detrend_window < 0)
    throw SchemaError("field 'detrend_window' in config.analysis must be "
                      ">= 0 samples");
  const std::string taper = field_or<std::string>(j, "taper", "rectangular");
  if (taper == "rectangular")
    cfg.taper = Taper::rectangular;
  else if (taper == "hann")
    cfg.taper = Taper::hann;
  else
    throw SchemaError("field 'taper' in config.analysis must be "
                      "\"rectangular\" or \"hann\"");
  return cfg;
}

inline IntegratorConfig integrator_from_json(const json& j) {
  IntegratorConfig cfg;
  if (!j.is_object()) return cfg;
  cfg.rel_tol = field_or<double>(j, "rel_tol", cfg.rel_tol);
  cfg.abs_tol = field_or<double>(j, "abs_tol", cfg.abs_tol);
  cfg.max_step_us = field_or<double>(j, "max_step_us", cfg.max_step_us);
  if (!(cfg.rel_tol > 0.0) || !(cfg.abs_tol > 0.0) || !(cfg.max_step_us > 0.0))
    throw SchemaError("config.integrator tolerances and max step must be "
                      "positive");
  const std::string method = field_or<std::string>(j, "method", "rkf78");
  if (method == "rkf78")
    cfg.method = RkMethod::rkf78;
  else if (method == "dp54")
    cfg.method = RkMethod::dp54;
  else
    throw SchemaError("field 'method' in config.integrator must be \"rkf78\" "
                      "or \"dp54\"");
  return cfg;
}

inline CampaignConfig load_campaign_config(const json& j) {
  CampaignConfig cfg;
  cfg.document = j;
  cfg.hash = config_hash(j);
  cfg.system = system_from_json(require_field(j, "system", "config"));

  if (auto it = j.find("protocol"); it != j.end() && it->is_object()) {
    const json& proto = *it;
    const bool has_hold = proto.contains("t_hold_us");
    if (has_hold) {
      HoldProtocolConfig hold;
      hold.t_delta_us = field_as<double>(proto, "t_delta_us", "config.protocol");
      hold.t_hold_us = field_as<double>(proto, "t_hold_us", "config.protocol");
      hold.sample_interval_us =
          field_or<double>(proto, "sample_interval_us", 0.01);
      if (!(hold.t_delta_us > 0.0))
        throw SchemaError("field 't_delta_us' in config.protocol must be "
                          "positive");
      if (!(hold.t_hold_us > 0.0))
        throw SchemaError("field 't_hold_us' in config.protocol must be "
                          "positive for a hold run");
      if (!(hold.sample_interval_us > 0.0))
        throw SchemaError("field 'sample_interval_us' in config.protocol "
                          "must be positive");
      cfg.hold = hold;
    }
    SweepProtocolConfig sweep;
    if (auto td = proto.find("t_delta_us");
        td != proto.end() && td->is_array()) {
      for (const auto& v : *td) {
        if (!v.is_number())
          throw SchemaError("field 't_delta_us' in config.protocol must "
                            "contain numbers");
        sweep.t_deltas_us.push_back(v.get<double>());
      }
    } else if (auto rg = proto.find("rate_grid"); rg != proto.end()) {
      const double lo = field_as<double>(*rg, "min_mhz_per_us",
                                         "config.protocol.rate_grid");
      const double hi = field_as<double>(*rg, "max_mhz_per_us",
                                         "config.protocol.rate_grid");
      const int n = field_as<int>(*rg, "points", "config.protocol.rate_grid");
      for (double rate : log_grid(lo, hi, n)) {
        // rate = span / (2 pi t_delta), so t_delta = span / (2 pi rate).
        const double span_mhz =
            (cfg.system.params.delta_max - cfg.system.params.delta_min) /
            kTwoPi;
        sweep.t_deltas_us.push_back(span_mhz / rate);
      }
      // Slowest ramps first: the longest jobs start before shorter ones.
      std::sort(sweep.t_deltas_us.rbegin(), sweep.t_deltas_us.rend());
    }
    if (!sweep.t_deltas_us.empty()) {
      for (double td : sweep.t_deltas_us)
        if (!(td > 0.0))
          throw SchemaError("ramp times in config.protocol must be positive");
      cfg.sweep = sweep;
    }
  }

  cfg.integrator = integrator_from_json(field_or<json>(j, "integrator", json::object()));
  cfg.analysis = analysis_from_json(field_or<json>(j, "analysis", json::object()));
  cfg.output_dir = field_or<std::string>(j, "output_dir", "out");
  cfg.seed = field_or<std::uint64_t>(j, "seed", 1);
  cfg.workers = field_or<int>(j, "workers", 0);
  cfg.store_states = field_or<bool>(j, "store_states", false);
  return cfg;
}

// ---- shared output helpers -----------------------------------------------

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

struct XiFit {
  double xi = std::numeric_limits<double>::quiet_NaN();
  double xi_err = std::numeric_limits<double>::quiet_NaN();
  std::string note;
};

inline XiFit xi_from_correlators(const std::vector<double>& corr, int lo,
                                 int hi) {
  XiFit out;
  std::vector<CorrPoint> pts;
  for (std::size_t i = 0; i < corr.size(); ++i)
    pts.push_back({static_cast<double>(i + 1), corr[i], 0.0});
  try {
    const int hi_eff = std::min<int>(hi, static_cast<int>(corr.size()));
    FitResult fit = fit_correlation_length(pts, lo, hi_eff);
    out.xi = fit.params[0].value;
    out.xi_err = fit.params[0].stderr_;
  } catch (const FitError& e) {
    out.note = e.what();
  }
  return out;
}

inline json pmf_to_json(const std::map<int, double>& pmf) {
  json j = json::object();
  for (const auto& [k, p] : pmf) j[std::to_string(k)] = p;
  return j;
}

}  // namespace detail

// Middle third of the sweep's rate range in log space; the default window
// for the power-law fit of the decay length.
inline std::pair<double, double> default_power_window(double rate_lo,
                                                      double rate_hi) {
  const double la = std::log(rate_lo);
  const double lb = std::log(rate_hi);
  return {std::exp(la + (lb - la) / 3.0), std::exp(la + 2.0 * (lb - la) / 3.0)};
}

// ---- commands -------------------------------------------------------------

inline int cmd_sweep(const CampaignConfig& cfg, std::ostream& log) {
  if (!cfg.sweep || cfg.sweep->t_deltas_us.empty())
    throw SchemaError("config.protocol needs 't_delta_us' (array) or "
                      "'rate_grid' for a sweep run");
  const auto& t_deltas = cfg.sweep->t_deltas_us;
  std::filesystem::create_directories(cfg.output_dir);

  log << "sweep: " << t_deltas.size() << " ramp times, L = "
      << cfg.system.n_sites << ", "
      << (cfg.system.constrained ? "constrained" : "full") << " space\n";

  SweepOptions opts;
  opts.workers = cfg.workers;
  opts.store_states = cfg.store_states;
  const auto t0 = std::chrono::steady_clock::now();
  auto points = run_kz_sweep(cfg.system, t_deltas, cfg.integrator, opts);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  log << "sweep: evolved " << points.size() << " points in " << elapsed
      << " s\n";

  const double rescale = cfg.analysis.size_rescale;
  bool any_failed = false;

  std::ostringstream sweep_csv;
  sweep_csv << csv_comment(cfg.hash);
  sweep_csv << "rate_mhz_per_us,t_delta_us,mean_D,var_D,ratio,xi,xi_err\n";
  std::ostringstream corr_csv;
  corr_csv << csv_comment(cfg.hash);
  corr_csv << "rate_mhz_per_us,t_delta_us,l,density_corr,defect_corr\n";
  json dist_json;
  dist_json["version"] = std::string(kVersion);
  dist_json["config_hash"] = cfg.hash;
  dist_json["size_rescale"] = rescale;
  dist_json["points"] = json::array();

  for (std::size_t i = 0; i < points.size(); ++i) {
    const SweepPoint& pt = points[i];
    if (!pt.ok) {
      any_failed = true;
      log << "sweep: point " << i << " (t_delta = " << pt.t_delta_us
          << " us) failed: " << pt.error << "\n";
      sweep_csv << detail::fmt(pt.rate_mhz_per_us) << ","
                << detail::fmt(pt.t_delta_us) << ",nan,nan,nan,nan,nan\n";
      continue;
    }
    const auto xi = detail::xi_from_correlators(pt.density_corr,
                                                cfg.analysis.corr_lo,
                                                cfg.analysis.corr_hi);
    if (!xi.note.empty())
      log << "sweep: point " << i << ": " << xi.note << "\n";
    const double mean_scaled = pt.moments.mean * rescale;
    const double var_scaled = pt.moments.var * rescale;
    sweep_csv << detail::fmt(pt.rate_mhz_per_us) << ","
              << detail::fmt(pt.t_delta_us) << ","
              << detail::fmt(mean_scaled) << "," << detail::fmt(var_scaled)
              << "," << detail::fmt(var_scaled / mean_scaled) << ","
              << detail::fmt(xi.xi) << "," << detail::fmt(xi.xi_err) << "\n";
    for (std::size_t l = 0; l < pt.density_corr.size(); ++l) {
      corr_csv << detail::fmt(pt.rate_mhz_per_us) << ","
               << detail::fmt(pt.t_delta_us) << "," << (l + 1) << ","
               << detail::fmt(pt.density_corr[l]) << ",";
      corr_csv << (l < pt.defect_corr.size()
                       ? detail::fmt(pt.defect_corr[l])
                       : std::string("nan"))
               << "\n";
    }
    json dp;
    dp["rate_mhz_per_us"] = pt.rate_mhz_per_us;
    dp["t_delta_us"] = pt.t_delta_us;
    dp["mean"] = pt.distribution.mean;
    dp["var"] = pt.distribution.var;
    dp["odd_mass"] = pt.distribution.odd_mass();
    dp["pmf"] = detail::pmf_to_json(pt.distribution.pmf);
    dp["tv_even_poisson"] = total_variation(
        pt.distribution.pmf, even_poisson_reference(pt.distribution.mean));
    dist_json["points"].push_back(std::move(dp));

    if (cfg.store_states && pt.final_state) {
      const auto state_path = std::filesystem::path(cfg.output_dir) /
                              ("state_" + std::to_string(i) + ".bin");
      write_state_file(state_path, *pt.final_state, cfg.hash);
    }
  }

  write_text_file(std::filesystem::path(cfg.output_dir) / "sweep.csv",
                  sweep_csv.str());
  write_text_file(std::filesystem::path(cfg.output_dir) / "correlators.csv",
                  corr_csv.str());
  write_text_file(std::filesystem::path(cfg.output_dir) / "distributions.json",
                  dist_json.dump(2) + "\n");
  log << "sweep: wrote sweep.csv, correlators.csv, distributions.json to "
      << cfg.output_dir << "\n";
  return any_failed ? 1 : 0;
}

inline int cmd_hold(const CampaignConfig& cfg, std::ostream& log) {
  if (!cfg.hold)
    throw SchemaError("config.protocol needs scalar 't_delta_us' and "
                      "'t_hold_us' for a hold run");
  std::filesystem::create_directories(cfg.output_dir);
  const auto& hp = *cfg.hold;

  log << "hold: t_delta = " << hp.t_delta_us << " us, t_hold = "
      << hp.t_hold_us << " us, sampling every " << hp.sample_interval_us
      << " us\n";

  HoldRun run = run_hold(cfg.system, hp.t_delta_us, hp.t_hold_us,
                         hp.sample_interval_us, cfg.integrator);

  std::ostringstream hold_csv;
  hold_csv << csv_comment(cfg.hash);
  hold_csv << "t_us,mean_D,var_D,xi,energy_rad_per_us,norm_drift\n";
  std::vector<double> times, means;
  for (const Snapshot& snap : run.snapshots) {
    const auto xi = detail::xi_from_correlators(snap.density_corr,
                                                cfg.analysis.corr_lo,
                                                cfg.analysis.corr_hi);
    hold_csv << detail::fmt(snap.t_us) << "," << detail::fmt(snap.mean_defects)
             << "," << detail::fmt(snap.var_defects) << ","
             << detail::fmt(xi.xi) << "," << detail::fmt(snap.energy) << ","
             << detail::fmt(snap.norm_deviation) << "\n";
    times.push_back(snap.t_us);
    means.push_back(snap.mean_defects);
  }
  write_text_file(std::filesystem::path(cfg.output_dir) / "hold.csv",
                  hold_csv.str());

  // Frozen-dynamics spectrum against the spectral gap of the plateau
  // Hamiltonian (full drive, final detuning).
  const SpectrumResult spec =
      hold_spectrum(times, means, cfg.analysis.detrend,
                    cfg.analysis.detrend_window, cfg.analysis.taper);
  auto basis = std::make_shared<ConstrainedBasis>(enumerate_basis(
      cfg.system.n_sites, cfg.system.boundary, cfg.system.constrained));
  RydbergHamiltonian h(basis, cfg.system.make_geometry(), cfg.system.params,
                       run.protocol, cfg.system.interaction_cutoff_um);
  const GapResult gap =
      spectral_gap(h, cfg.system.params.omega_max, cfg.system.params.delta_max);

  double peak_mag = 0.0;
  for (std::size_t k = 1; k < spec.magnitude.size(); ++k)
    peak_mag = std::max(peak_mag, spec.magnitude[k]);
  double subgap = 0.0;
  for (std::size_t k = 1; k < spec.magnitude.size(); ++k)
    if (spec.freq_mhz[k] < gap.gap_mhz - spec.resolution_mhz)
      subgap += spec.magnitude[k];

  json sj;
  sj["version"] = std::string(kVersion);
  sj["config_hash"] = cfg.hash;
  sj["t_delta_us"] = hp.t_delta_us;
  sj["t_hold_us"] = hp.t_hold_us;
  sj["gap_rad_per_us"] = gap.gap;
  sj["gap_mhz"] = gap.gap_mhz;
  sj["e0_rad_per_us"] = gap.e0;
  sj["e1_rad_per_us"] = gap.e1;
  sj["lanczos_iterations"] = gap.iterations;
  sj["resolution_mhz"] = spec.resolution_mhz;
  sj["dominant_freq_mhz"] = spec.dominant_freq_mhz;
  sj["taper"] = cfg.analysis.taper == Taper::hann ? "hann" : "rectangular";
  sj["detrend_window"] = cfg.analysis.detrend_window;
  sj["peak_magnitude"] = peak_mag;
  sj["subgap_magnitude_sum"] = subgap;
  sj["subgap_fraction_of_peak"] = peak_mag > 0.0 ? subgap / peak_mag : 0.0;
  sj["freq_mhz"] = spec.freq_mhz;
  sj["magnitude"] = spec.magnitude;
  write_text_file(std::filesystem::path(cfg.output_dir) / "spectrum.json",
                  sj.dump(2) + "\n");
  log << "hold: wrote hold.csv, spectrum.json to " << cfg.output_dir
      << " (gap " << gap.gap_mhz << " MHz, dominant "
      << spec.dominant_freq_mhz << " MHz)\n";
  return 0;
}

inline int cmd_compare_space(const CampaignConfig& cfg, std::ostream& log) {
  if (!cfg.sweep || cfg.sweep->t_deltas_us.empty())
    throw SchemaError("config.protocol needs ramp times for a space "
                      "comparison");
  if (cfg.system.n_sites > 16)
    throw CapacityError("space comparison runs the unconstrained space and "
                        "is capped at 16 sites, got " +
                        std::to_string(cfg.system.n_sites));
  std::filesystem::create_directories(cfg.output_dir);

  SweepOptions opts;
  opts.workers = cfg.workers;

  SystemSpec constrained = cfg.system;
  constrained.constrained = true;
  SystemSpec full = cfg.system;
  full.constrained = false;

  log << "compare-space: L = " << cfg.system.n_sites << ", "
      << cfg.sweep->t_deltas_us.size() << " ramp times\n";
  auto pc = run_kz_sweep(constrained, cfg.sweep->t_deltas_us, cfg.integrator,
                         opts);
  log << "compare-space: constrained space done\n";
  auto pf = run_kz_sweep(full, cfg.sweep->t_deltas_us, cfg.integrator, opts);
  log << "compare-space: full space done\n";

  bool any_failed = false;
  std::ostringstream csv;
  csv << csv_comment(cfg.hash);
  csv << "rate_mhz_per_us,t_delta_us,mean_D_constrained,var_D_constrained,"
         "ratio_constrained,mean_D_full,var_D_full,ratio_full\n";
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const SweepPoint& a = pc[i];
    const SweepPoint& b = pf[i];
    if (!a.ok || !b.ok) {
      any_failed = true;
      log << "compare-space: point " << i << " failed: "
          << (a.ok ? b.error : a.error) << "\n";
      csv << detail::fmt(a.rate_mhz_per_us) << "," << detail::fmt(a.t_delta_us)
          << ",nan,nan,nan,nan,nan,nan\n";
      continue;
    }
    csv << detail::fmt(a.rate_mhz_per_us) << "," << detail::fmt(a.t_delta_us)
        << "," << detail::fmt(a.moments.mean) << ","
        << detail::fmt(a.moments.var) << ","
        << detail::fmt(a.moments.var / a.moments.mean) << ","
        << detail::fmt(b.moments.mean) << "," << detail::fmt(b.moments.var)
        << "," << detail::fmt(b.moments.var / b.moments.mean) << "\n";
  }
  write_text_file(std::filesystem::path(cfg.output_dir) / "compare.csv",
                  csv.str());
  log << "compare-space: wrote compare.csv to " << cfg.output_dir << "\n";
  return any_failed ? 1 : 0;
}

struct MitigateOptions {
  WallObservable observable = WallObservable::mean;
  ExtrapOrder order = ExtrapOrder::linear;
  std::vector<double> alphas{1.0, 2.0, 3.0};
  std::vector<double> betas{1.0, 1.5, 2.0};
  int repeats = 4;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
};

inline int cmd_mitigate(const std::filesystem::path& shots_path,
                        const std::filesystem::path& calibration_path,
                        const MitigateOptions& opts, std::ostream& log) {
  const BitstringSample sample = read_shot_file(shots_path);
  const json cal = load_json_file(calibration_path);
  ReadoutModel model;
  model.eps10 = field_as<double>(cal, "eps10", "calibration");
  model.eps01 = field_as<double>(cal, "eps01", "calibration");
  model.d_eps10 = field_or<double>(cal, "d_eps10", 0.0);
  model.d_eps01 = field_or<double>(cal, "d_eps01", 0.0);
  model.validate();

  ZNEGrid grid;
  grid.alphas = opts.alphas;
  grid.betas = opts.betas;
  grid.repeats = opts.repeats;
  grid.seed = opts.seed;

  const std::string obs_name =
      opts.observable == WallObservable::mean ? "mean" : "variance";
  log << "mitigate: " << sample.total_shots << " shots, observable "
      << obs_name << "\n";

  ZNEResult res = zne_mitigate(sample, model, grid, opts.observable,
                               opts.order);
  res.sys_err = systematic_error(sample, model, grid, opts.observable,
                                 opts.order);
  const double raw = opts.observable == WallObservable::mean
                         ? estimate_moments(sample).mean
                         : estimate_moments(sample).var;

  json out;
  out["version"] = std::string(kVersion);
  out["shots_file"] = shots_path.string();
  out["calibration_file"] = calibration_path.string();
  out["observable"] = obs_name;
  out["order"] =
      opts.order == ExtrapOrder::linear ? "linear" : "quadratic";
  out["raw_value"] = raw;
  out["value"] = res.value;
  out["stat_err"] = res.stat_err;
  out["sys_err"] = res.sys_err;
  out["residual_norm"] = res.residual_norm;
  out["model"] = {{"eps10", model.eps10},
                  {"eps01", model.eps01},
                  {"d_eps10", model.d_eps10},
                  {"d_eps01", model.d_eps01}};
  out["grid"] = json::array();
  for (const auto& g : res.grid)
    out["grid"].push_back({{"alpha", g.alpha},
                           {"beta", g.beta},
                           {"eps01", g.eps01},
                           {"eps10", g.eps10},
                           {"value", g.value},
                           {"stat_err", g.stat_err}});
  out["intermediates"] = json::array();
  for (const auto& m : res.intermediates)
    out["intermediates"].push_back({{"beta", m.beta},
                                    {"eps10", m.eps10},
                                    {"value", m.value},
                                    {"stat_err", m.stat_err}});
  if (opts.observable == WallObservable::mean)
    out["confusion_inverse_mean"] = confusion_inverse_mean(sample, model);
  for (const auto& w : res.warnings) out["warnings"].push_back(w);

  std::filesystem::create_directories(opts.output_dir);
  write_text_file(std::filesystem::path(opts.output_dir) / "mitigation.json",
                  out.dump(2) + "\n");
  log << "mitigate: " << obs_name << " = " << res.value << " +- "
      << res.stat_err << " (stat) +- " << res.sys_err << " (sys)\n";
  return 0;
}

inline int cmd_fit(const std::filesystem::path& sweep_csv_path,
                   std::optional<std::pair<double, double>> window,
                   const std::filesystem::path& out_dir, std::ostream& log) {
  const CsvTable table = read_csv_file(sweep_csv_path);
  const std::size_t c_rate = table.column_index("rate_mhz_per_us");
  const std::size_t c_xi = table.column_index("xi");
  const std::size_t c_xi_err = table.column_index("xi_err");
  const std::size_t c_mean = table.column_index("mean_D");
  const std::size_t c_var = table.column_index("var_D");

  std::vector<CorrPoint> xi_points;
  double rate_lo = 0.0, rate_hi = 0.0;
  json anomalies = json::array();
  for (const auto& row : table.rows) {
    const double rate = row[c_rate];
    if (rate_lo == 0.0 || rate < rate_lo) rate_lo = rate;
    if (rate > rate_hi) rate_hi = rate;
    if (!std::isnan(row[c_xi]))
      xi_points.push_back({rate, row[c_xi],
                           std::isnan(row[c_xi_err]) ? 0.0 : row[c_xi_err]});
    if (!std::isnan(row[c_mean]) && row[c_mean] > 0.0)
      anomalies.push_back({{"rate_mhz_per_us", rate},
                           {"ratio", row[c_var] / row[c_mean]}});
  }
  if (xi_points.empty())
    throw SchemaError(sweep_csv_path.string() +
                      " has no usable decay-length rows");
  const auto win = window ? *window : default_power_window(rate_lo, rate_hi);
  FitResult fit = fit_power_law(xi_points, win.first, win.second);

  json out;
  out["version"] = std::string(kVersion);
  out["input"] = sweep_csv_path.string();
  out["window_mhz_per_us"] = {win.first, win.second};
  out["mu"] = fit.params[0].value;
  out["mu_err"] = fit.params[0].stderr_;
  out["points_used"] = fit.used_x.size();
  out["residual_norm"] = fit.residual_norm;
  out["anomaly_ratios"] = anomalies;
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "fit.json", out.dump(2) + "\n");
  log << "fit: mu = " << fit.params[0].value << " +- "
      << fit.params[0].stderr_ << " over [" << win.first << ", "
      << win.second << "] MHz/us (" << fit.used_x.size() << " points)\n";
  return 0;
}

inline int cmd_sample(const std::filesystem::path& state_path,
                      std::uint64_t n_shots, std::uint64_t seed,
                      const std::filesystem::path& out_path,
                      std::ostream& log) {
  const QuantumState psi = read_state_file(state_path);
  const BitstringSample sample = sample_bitstrings(psi, n_shots, seed);
  write_shot_file(out_path, sample,
                  "sampled from " + state_path.string() + " with seed " +
                      std::to_string(seed));
  log << "sample: wrote " << n_shots << " shots to " << out_path << "\n";
  return 0;
}

}  // namespace rydkz
