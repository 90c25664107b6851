// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "rydkz/errors.hpp"
#include "rydkz/state.hpp"

namespace rydkz {

enum class RkMethod { dp54, rkf78 };

struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step_us = 0.1;
  RkMethod method = RkMethod::rkf78;
};

struct StepStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
  // Sum of L2 norms of the per-step local error estimates. For
  // norm-preserving dynamics local errors add without amplification, so
  // this is an honest global error claim.
  double accumulated_error = 0.0;
  // Largest |  ||y|| - 1 | seen after any accepted step, before the step's
  // renormalization. The unitarity defect of the discretization.
  double max_norm_deviation = 0.0;

  void merge(const StepStats& o) {
    accepted += o.accepted;
    rejected += o.rejected;
    rhs_evaluations += o.rhs_evaluations;
    accumulated_error += o.accumulated_error;
    max_norm_deviation = std::max(max_norm_deviation, o.max_norm_deviation);
  }
};

namespace detail {

// Butcher tableau of an embedded Runge-Kutta pair; a is row-major
// stages x stages lower-triangular, b propagates, db estimates the error.
struct RkTableau {
  int stages;
  int error_order;  // order of the embedded (error-estimating) solution
  bool first_same_as_last;
  const double* c;
  const double* a;
  const double* b;
  const double* db;
};

// Dormand-Prince 5(4).
inline const RkTableau& dp54_tableau() {
  static const double c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static const double a[49] = {
      // clang-format off
      0, 0, 0, 0, 0, 0, 0,
      1.0/5, 0, 0, 0, 0, 0, 0,
      3.0/40, 9.0/40, 0, 0, 0, 0, 0,
      44.0/45, -56.0/15, 32.0/9, 0, 0, 0, 0,
      19372.0/6561, -25360.0/2187, 64448.0/6561, -212.0/729, 0, 0, 0,
      9017.0/3168, -355.0/33, 46732.0/5247, 49.0/176, -5103.0/18656, 0, 0,
      35.0/384, 0, 500.0/1113, 125.0/192, -2187.0/6784, 11.0/84, 0,
      // clang-format on
  };
  static const double b[7] = {35.0 / 384,      0,          500.0 / 1113,
                              125.0 / 192,     -2187.0 / 6784,
                              11.0 / 84,       0};
  static const double bl[7] = {5179.0 / 57600,  0,         7571.0 / 16695,
                               393.0 / 640,     -92097.0 / 339200,
                               187.0 / 2100,    1.0 / 40};
  static double db[7];
  static const bool init = [] {
    for (int i = 0; i < 7; ++i) db[i] = b[i] - bl[i];
    return true;
  }();
  (void)init;
  static const RkTableau t{7, 4, true, c, a, b, db};
  return t;
}

// Fehlberg 7(8): propagates the eighth-order solution, estimates the error
// of the embedded seventh-order one.
inline const RkTableau& rkf78_tableau() {
  static const double c[13] = {0.0,       2.0 / 27, 1.0 / 9, 1.0 / 6,
                               5.0 / 12,  0.5,      5.0 / 6, 1.0 / 6,
                               2.0 / 3,   1.0 / 3,  1.0,     0.0,
                               1.0};
  static const double a[169] = {
      // clang-format off
      0,0,0,0,0,0,0,0,0,0,0,0,0,
      2.0/27, 0,0,0,0,0,0,0,0,0,0,0,0,
      1.0/36, 1.0/12, 0,0,0,0,0,0,0,0,0,0,0,
      1.0/24, 0, 1.0/8, 0,0,0,0,0,0,0,0,0,0,
      5.0/12, 0, -25.0/16, 25.0/16, 0,0,0,0,0,0,0,0,0,
      1.0/20, 0, 0, 1.0/4, 1.0/5, 0,0,0,0,0,0,0,0,
      -25.0/108, 0, 0, 125.0/108, -65.0/27, 125.0/54, 0,0,0,0,0,0,0,
      31.0/300, 0, 0, 0, 61.0/225, -2.0/9, 13.0/900, 0,0,0,0,0,0,
      2.0, 0, 0, -53.0/6, 704.0/45, -107.0/9, 67.0/90, 3.0, 0,0,0,0,0,
      -91.0/108, 0, 0, 23.0/108, -976.0/135, 311.0/54, -19.0/60, 17.0/6,
          -1.0/12, 0,0,0,0,
      2383.0/4100, 0, 0, -341.0/164, 4496.0/1025, -301.0/82, 2133.0/4100,
          45.0/82, 45.0/164, 18.0/41, 0,0,0,
      3.0/205, 0, 0, 0, 0, -6.0/41, -3.0/205, -3.0/41, 3.0/41, 6.0/41, 0,0,0,
      -1777.0/4100, 0, 0, -341.0/164, 4496.0/1025, -289.0/82, 2193.0/4100,
          51.0/82, 33.0/164, 12.0/41, 0, 1.0, 0,
      // clang-format on
  };
  static const double b[13] = {0, 0, 0, 0, 0,
                               34.0 / 105, 9.0 / 35, 9.0 / 35,
                               9.0 / 280,  9.0 / 280, 0,
                               41.0 / 840, 41.0 / 840};
  static const double db[13] = {-41.0 / 840, 0, 0, 0, 0, 0, 0, 0, 0, 0,
                                -41.0 / 840, 41.0 / 840, 41.0 / 840};
  static const RkTableau t{13, 7, false, c, a, b, db};
  return t;
}

inline const RkTableau& tableau_for(RkMethod m) {
  return m == RkMethod::dp54 ? dp54_tableau() : rkf78_tableau();
}

}  // namespace detail

// Integrates dy/dt = rhs(t, y) over one smooth interval [t0, t1] with an
// embedded adaptive Runge-Kutta pair and a standard step controller.
//
//   rhs(double t, const cvec& y, cvec& dydt)
//   post_step(double t, cvec& y)   called after every accepted step
//
// `h_next` carries the suggested step size across segment boundaries.
// The controller never steps past t1 and records both accepted-step error
// estimates and rejects in `stats`.
template <class Rhs, class PostStep>
inline void integrate_interval(Rhs&& rhs, cvec& y, double t0, double t1,
                               const IntegratorConfig& cfg, StepStats& stats,
                               double& h_next, PostStep&& post_step) {
  if (!(t1 > t0)) {
    if (t1 == t0) return;
    throw IntegrationError("integration interval is reversed");
  }
  if (!(cfg.rel_tol > 0.0) || !(cfg.abs_tol > 0.0))
    throw IntegrationError("tolerances must be positive");
  const auto& tab = detail::tableau_for(cfg.method);
  const int s = tab.stages;
  const std::size_t n = y.size();

  std::vector<cvec> k(static_cast<std::size_t>(s), cvec(n));
  cvec y_stage(n), y_new(n);

  double t = t0;
  double h = std::clamp(h_next, 1e-9, cfg.max_step_us);
  h = std::min(h, t1 - t0);
  const double pow_exp = -1.0 / (tab.error_order + 1);

  bool have_k0 = false;
  std::size_t consecutive_rejects = 0;
  while (t < t1) {
    h = std::min(h, t1 - t);
    if (h < 1e-14 * std::max(1.0, std::abs(t)))
      throw IntegrationError(
          "step size underflow at t = " + std::to_string(t) +
          " us after " + std::to_string(stats.accepted) + " steps");

    if (!have_k0) {
      rhs(t, y, k[0]);
      ++stats.rhs_evaluations;
      have_k0 = true;
    }
    for (int i = 1; i < s; ++i) {
      const double* ai = tab.a + static_cast<std::size_t>(i) * s;
      for (std::size_t m = 0; m < n; ++m) {
        cplx acc = ai[0] * k[0][m];
        for (int j = 1; j < i; ++j)
          if (ai[j] != 0.0) acc += ai[j] * k[static_cast<std::size_t>(j)][m];
        y_stage[m] = y[m] + h * acc;
      }
      rhs(t + tab.c[i] * h, y_stage, k[static_cast<std::size_t>(i)]);
      ++stats.rhs_evaluations;
    }

    // Propagated solution and embedded error estimate.
    double err_sq = 0.0;
    double err_abs_sq = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      cplx acc{};
      cplx eacc{};
      for (int j = 0; j < s; ++j) {
        if (tab.b[j] != 0.0) acc += tab.b[j] * k[static_cast<std::size_t>(j)][m];
        if (tab.db[j] != 0.0)
          eacc += tab.db[j] * k[static_cast<std::size_t>(j)][m];
      }
      y_new[m] = y[m] + h * acc;
      const double e = std::abs(h * eacc);
      const double sc =
          cfg.abs_tol +
          cfg.rel_tol * std::max(std::abs(y[m]), std::abs(y_new[m]));
      err_sq += (e / sc) * (e / sc);
      err_abs_sq += e * e;
    }
    const double err = std::sqrt(err_sq / static_cast<double>(n));

    if (err <= 1.0) {
      t += h;
      y.swap(y_new);
      stats.accumulated_error += std::sqrt(err_abs_sq);
      ++stats.accepted;
      consecutive_rejects = 0;
      post_step(t, y);
      // No FSAL reuse: a renormalizing post-step hook rescales y, so the
      // last stage is no longer f(t_new, y_new).
      have_k0 = false;
      const double fac =
          std::clamp(0.9 * std::pow(std::max(err, 1e-12), pow_exp), 0.2, 5.0);
      h = std::min(h * fac, cfg.max_step_us);
    } else {
      ++stats.rejected;
      ++consecutive_rejects;
      if (consecutive_rejects > 60)
        throw IntegrationError("step controller stalled at t = " +
                               std::to_string(t) + " us");
      const double fac =
          std::clamp(0.9 * std::pow(err, pow_exp), 0.1, 0.9);
      h *= fac;
      have_k0 = true;  // k0 is still valid at unchanged (t, y)
    }
  }
  h_next = h;
}

}  // namespace rydkz
