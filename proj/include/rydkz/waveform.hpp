// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rydkz/errors.hpp"

namespace rydkz {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Piecewise-linear control waveform. Times in microseconds, values in
// angular frequency (rad/us). Evaluation outside the domain is an error,
// not an extrapolation.
class Waveform {
 public:
  Waveform() = default;

  explicit Waveform(std::vector<std::pair<double, double>> points)
      : points_(std::move(points)) {
    if (points_.size() < 2)
      throw ProtocolError("waveform needs at least two breakpoints");
    for (std::size_t i = 1; i < points_.size(); ++i)
      if (!(points_[i].first > points_[i - 1].first))
        throw ProtocolError("waveform breakpoints must strictly increase; "
                            "offender at index " + std::to_string(i));
  }

  static Waveform constant(double t0, double t1, double value) {
    return Waveform({{t0, value}, {t1, value}});
  }

  double t_first() const { return points_.front().first; }
  double t_last() const { return points_.back().first; }

  const std::vector<std::pair<double, double>>& breakpoints() const {
    return points_;
  }

  double operator()(double t) const {
    check_domain(t, t);
    auto it = std::upper_bound(
        points_.begin(), points_.end(), t,
        [](double v, const auto& p) { return v < p.first; });
    if (it == points_.end()) return points_.back().second;
    if (it == points_.begin()) return points_.front().second;
    const auto& [t1, v1] = *it;
    const auto& [t0, v0] = *(it - 1);
    const double w = (t - t0) / (t1 - t0);
    return v0 + w * (v1 - v0);
  }

  // Exact integral of the piecewise-linear interpolant over [a, b].
  double integral(double a, double b) const {
    check_domain(a, b);
    if (b < a) throw ProtocolError("waveform integral needs a <= b");
    double acc = 0.0;
    for (std::size_t i = 1; i < points_.size(); ++i) {
      const double lo = std::max(a, points_[i - 1].first);
      const double hi = std::min(b, points_[i].first);
      if (hi <= lo) continue;
      acc += 0.5 * (value_unchecked(lo) + value_unchecked(hi)) * (hi - lo);
    }
    return acc;
  }

 private:
  void check_domain(double a, double b) const {
    const double eps = 1e-12 * std::max(1.0, std::abs(t_last()));
    if (a < t_first() - eps || b > t_last() + eps)
      throw ProtocolError("waveform evaluated outside [" +
                          std::to_string(t_first()) + ", " +
                          std::to_string(t_last()) + "] us");
  }

  double value_unchecked(double t) const {
    auto it = std::upper_bound(
        points_.begin(), points_.end(), t,
        [](double v, const auto& p) { return v < p.first; });
    if (it == points_.end()) return points_.back().second;
    if (it == points_.begin()) return points_.front().second;
    const auto& [t1, v1] = *it;
    const auto& [t0, v0] = *(it - 1);
    return v0 + (t - t0) / (t1 - t0) * (v1 - v0);
  }

  std::vector<std::pair<double, double>> points_;
};

// Drive parameters in internal angular units (rad/us; C6 in rad/us um^6).
// File and config interfaces use linear frequencies in MHz and convert on
// load, so "over_2pi" values never appear past this boundary.
struct RydbergParams {
  double c6 = 0.0;
  double omega_max = 0.0;
  double delta_min = 0.0;
  double delta_max = 0.0;

  static RydbergParams from_linear_mhz(double c6_mhz_um6, double omega_mhz,
                                       double delta_min_mhz,
                                       double delta_max_mhz) {
    return {kTwoPi * c6_mhz_um6, kTwoPi * omega_mhz, kTwoPi * delta_min_mhz,
            kTwoPi * delta_max_mhz};
  }

  void validate() const {
    if (!(c6 > 0.0)) throw ProtocolError("interaction coefficient must be positive");
    if (!(omega_max > 0.0)) throw ProtocolError("drive amplitude must be positive");
    if (!(delta_max > delta_min))
      throw ProtocolError("detuning sweep must run upward");
  }
};

// Distance below which the interaction exceeds the drive amplitude.
inline double blockade_radius_um(double c6, double omega) {
  if (!(omega > 0.0)) throw ProtocolError("blockade radius needs omega > 0");
  return std::pow(c6 / omega, 1.0 / 6.0);
}

// Detuning sweep rate in linear units (MHz/us): full span over ramp time.
inline double sweep_rate_mhz_per_us(double t_delta_us,
                                    const RydbergParams& p) {
  if (!(t_delta_us > 0.0)) throw ProtocolError("ramp time must be positive");
  return (p.delta_max - p.delta_min) / (kTwoPi * t_delta_us);
}

struct ProtocolMarkers {
  double ramp_start = 0.0;
  double ramp_end = 0.0;
  std::optional<double> hold_end;
};

// A full drive schedule: both control waveforms share [0, duration] and
// the drive amplitude vanishes at both ends.
struct DriveProtocol {
  Waveform omega;
  Waveform delta;
  double duration = 0.0;
  ProtocolMarkers markers;

  // Union of both waveforms' breakpoints: the integrator treats these as
  // hard step boundaries so every step sees a smooth right-hand side.
  std::vector<double> segment_times() const {
    std::vector<double> ts;
    for (const auto& p : omega.breakpoints()) ts.push_back(p.first);
    for (const auto& p : delta.breakpoints()) ts.push_back(p.first);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end(),
                         [](double a, double b) {
                           return std::abs(a - b) < 1e-12;
                         }),
             ts.end());
    return ts;
  }
};

// Three-phase sweep: switch the drive on at the bottom detuning, sweep the
// detuning linearly across zero, switch the drive off at the top detuning.
inline DriveProtocol build_kz_protocol(double t_delta_us,
                                       const RydbergParams& p,
                                       double t_edge_us = 0.5) {
  p.validate();
  if (!(t_delta_us > 0.0)) throw ProtocolError("ramp time must be positive");
  if (!(t_edge_us > 0.0)) throw ProtocolError("edge time must be positive");
  const double t1 = t_edge_us;
  const double t2 = t_edge_us + t_delta_us;
  const double t3 = t2 + t_edge_us;
  DriveProtocol proto;
  proto.omega = Waveform({{0.0, 0.0},
                          {t1, p.omega_max},
                          {t2, p.omega_max},
                          {t3, 0.0}});
  proto.delta = Waveform({{0.0, p.delta_min},
                          {t1, p.delta_min},
                          {t2, p.delta_max},
                          {t3, p.delta_max}});
  proto.duration = t3;
  proto.markers = {t1, t2, std::nullopt};
  return proto;
}

// Same sweep with a constant plateau inserted between the end of the
// detuning ramp and the drive switch-off. t_hold = 0 reproduces the plain
// sweep exactly, markers aside.
inline DriveProtocol build_hold_protocol(double t_delta_us, double t_hold_us,
                                         const RydbergParams& p,
                                         double t_edge_us = 0.5) {
  if (t_hold_us < 0.0) throw ProtocolError("hold time must be nonnegative");
  if (t_hold_us == 0.0) {
    DriveProtocol proto = build_kz_protocol(t_delta_us, p, t_edge_us);
    proto.markers.hold_end = proto.markers.ramp_end;
    return proto;
  }
  p.validate();
  if (!(t_delta_us > 0.0)) throw ProtocolError("ramp time must be positive");
  if (!(t_edge_us > 0.0)) throw ProtocolError("edge time must be positive");
  const double t1 = t_edge_us;
  const double t2 = t_edge_us + t_delta_us;
  const double t3 = t2 + t_hold_us;
  const double t4 = t3 + t_edge_us;
  DriveProtocol proto;
  proto.omega = Waveform({{0.0, 0.0},
                          {t1, p.omega_max},
                          {t2, p.omega_max},
                          {t3, p.omega_max},
                          {t4, 0.0}});
  proto.delta = Waveform({{0.0, p.delta_min},
                          {t1, p.delta_min},
                          {t2, p.delta_max},
                          {t3, p.delta_max},
                          {t4, p.delta_max}});
  proto.duration = t4;
  proto.markers = {t1, t2, t3};
  return proto;
}

}  // namespace rydkz
