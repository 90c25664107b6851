// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: sweep, hold, mitigate, compare-space, fit, sample.
// Exit codes: 0 success, 1 runtime failure (partial results possible),
// 2 configuration or usage error.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rydkz/campaign.hpp"
#include "rydkz/version.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out_dir;
};

int default_workers_from_env() {
  if (const char* env = std::getenv("RYDKZ_WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w > 0) return w;
    } catch (...) {
    }
    std::cerr << "warning: ignoring non-numeric RYDKZ_WORKERS\n";
  }
  return 0;  // hardware concurrency
}

rydkz::CampaignConfig load_config(const CommonFlags& flags) {
  rydkz::CampaignConfig cfg =
      rydkz::load_campaign_config(rydkz::load_json_file(flags.config_path));
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.out_dir) cfg.output_dir = *flags.out_dir;
  if (flags.workers)
    cfg.workers = *flags.workers;
  else if (cfg.workers == 0)
    cfg.workers = default_workers_from_env();
  return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "campaign config JSON")
      ->required();
  cmd->add_option("--seed", flags.seed, "override the config seed");
  cmd->add_option("--workers", flags.workers,
                  "worker threads (default: config, RYDKZ_WORKERS, or all "
                  "cores)");
  cmd->add_option("--out", flags.out_dir, "override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"driven-chain defect statistics toolkit"};
  app.set_version_flag("--version", std::string(rydkz::kVersion));
  app.require_subcommand(1);

  CommonFlags sweep_flags, hold_flags, compare_flags;
  auto* c_sweep = app.add_subcommand(
      "sweep", "evolve the sweep protocol across a grid of ramp rates");
  add_common(c_sweep, sweep_flags);
  auto* c_hold = app.add_subcommand(
      "hold", "evolve a sweep-and-hold protocol and analyze the plateau");
  add_common(c_hold, hold_flags);
  auto* c_compare = app.add_subcommand(
      "compare-space",
      "run the same sweep in the constrained and full spaces");
  add_common(c_compare, compare_flags);

  std::string shots_path, calibration_path;
  std::string observable = "mean", order = "linear";
  rydkz::MitigateOptions mit_opts;
  std::optional<std::uint64_t> mit_seed;
  auto* c_mitigate = app.add_subcommand(
      "mitigate", "readout-error mitigation of a shot file");
  c_mitigate->add_option("--shots", shots_path, "shot file")->required();
  c_mitigate
      ->add_option("--calibration", calibration_path,
                   "calibration JSON with eps10/eps01 and uncertainties")
      ->required();
  c_mitigate->add_option("--observable", observable, "mean or variance")
      ->check(CLI::IsMember({"mean", "variance"}));
  c_mitigate->add_option("--order", order,
                         "extrapolation order for the 1->0 rate")
      ->check(CLI::IsMember({"linear", "quadratic"}));
  c_mitigate->add_option("--alphas", mit_opts.alphas,
                         "0->1 amplification factors");
  c_mitigate->add_option("--betas", mit_opts.betas,
                         "1->0 amplification factors");
  c_mitigate->add_option("--repeats", mit_opts.repeats,
                         "resampling repeats per grid point");
  c_mitigate->add_option("--seed", mit_seed, "resampling seed");
  c_mitigate->add_option("--out", mit_opts.output_dir, "output directory");

  std::string fit_csv, fit_out = "out";
  std::vector<double> fit_window;
  auto* c_fit = app.add_subcommand(
      "fit", "power-law fit of decay length against ramp rate");
  c_fit->add_option("--sweep-csv", fit_csv, "sweep.csv produced by 'sweep'")
      ->required();
  c_fit->add_option("--window", fit_window,
                    "rate window lo hi in MHz/us (default: middle log third)")
      ->expected(2);
  c_fit->add_option("--out", fit_out, "output directory");

  std::string sample_state, sample_out = "shots.txt";
  std::uint64_t sample_shots = 2000, sample_seed = 1;
  auto* c_sample = app.add_subcommand(
      "sample", "draw projective shots from a saved state");
  c_sample->add_option("--state", sample_state, "state dump file")->required();
  c_sample->add_option("--shots", sample_shots, "number of shots");
  c_sample->add_option("--seed", sample_seed, "sampling seed");
  c_sample->add_option("--out", sample_out, "shot file to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_sweep->parsed())
      return rydkz::cmd_sweep(load_config(sweep_flags), std::cerr);
    if (c_hold->parsed())
      return rydkz::cmd_hold(load_config(hold_flags), std::cerr);
    if (c_compare->parsed())
      return rydkz::cmd_compare_space(load_config(compare_flags), std::cerr);
    if (c_mitigate->parsed()) {
      mit_opts.observable = observable == "mean"
                                ? rydkz::WallObservable::mean
                                : rydkz::WallObservable::variance;
      mit_opts.order = order == "linear" ? rydkz::ExtrapOrder::linear
                                         : rydkz::ExtrapOrder::quadratic;
      if (mit_seed) mit_opts.seed = *mit_seed;
      return rydkz::cmd_mitigate(shots_path, calibration_path, mit_opts,
                                 std::cerr);
    }
    if (c_fit->parsed()) {
      std::optional<std::pair<double, double>> window;
      if (!fit_window.empty()) window = {fit_window[0], fit_window[1]};
      return rydkz::cmd_fit(fit_csv, window, fit_out, std::cerr);
    }
    if (c_sample->parsed())
      return rydkz::cmd_sample(sample_state, sample_shots, sample_seed,
                               sample_out, std::cerr);
  } catch (const rydkz::SchemaError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const rydkz::CapacityError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
