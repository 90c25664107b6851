// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "rydkz/errors.hpp"
#include "rydkz/observables.hpp"

namespace rydkz {

struct FitParam {
  std::string name;
  double value = 0.0;
  double stderr_ = 0.0;
};

struct FitResult {
  std::vector<FitParam> params;
  std::vector<double> covariance;  // row-major, params x params
  double residual_norm = 0.0;      // weighted RMS residual
  double window_lo = 0.0;
  double window_hi = 0.0;
  std::vector<double> used_x;
};

namespace detail {

struct PolyFit {
  std::vector<double> coef;  // coef[k] multiplies x^k
  std::vector<double> cov;   // row-major (order+1)^2
  double weighted_rms = 0.0;
};

// Weighted least squares for a low-order polynomial via normal equations
// with partial pivoting; fine for the order <= 2, well-scaled problems here.
inline PolyFit wls_polyfit(std::span<const double> x, std::span<const double> y,
                           std::span<const double> sigma, int order) {
  const std::size_t n = x.size();
  const int p = order + 1;
  if (order < 0) throw FitError("polynomial order must be nonnegative");
  if (p > 8) throw FitError("polynomial order capped at 7");
  if (n < static_cast<std::size_t>(p))
    throw FitError("fit of order " + std::to_string(order) + " needs at least " +
                   std::to_string(p) + " points, got " + std::to_string(n));
  {
    std::vector<double> xs(x.begin(), x.end());
    std::sort(xs.begin(), xs.end());
    int distinct = 1;
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (xs[i] > xs[i - 1] + 1e-14 * std::max(1.0, std::abs(xs[i])))
        ++distinct;
    if (distinct < p)
      throw FitError("fit of order " + std::to_string(order) + " needs " +
                     std::to_string(p) + " distinct abscissae, got " +
                     std::to_string(distinct));
  }

  std::vector<double> w(n, 1.0);
  if (!sigma.empty()) {
    if (sigma.size() != n) throw FitError("sigma length mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      const double s = std::max(std::abs(sigma[i]), 1e-12);
      w[i] = 1.0 / (s * s);
    }
  }

  // Normal matrix A = X^T W X and rhs = X^T W y.
  std::vector<double> a(static_cast<std::size_t>(p) * p, 0.0);
  std::vector<double> rhs(static_cast<std::size_t>(p), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double xp[8];
    xp[0] = 1.0;
    for (int k = 1; k < p; ++k) xp[k] = xp[k - 1] * x[i];
    for (int r = 0; r < p; ++r) {
      rhs[static_cast<std::size_t>(r)] += w[i] * xp[r] * y[i];
      for (int c = 0; c < p; ++c)
        a[static_cast<std::size_t>(r) * p + c] += w[i] * xp[r] * xp[c];
    }
  }

  // Invert A by Gauss-Jordan with partial pivoting; A^-1 is the parameter
  // covariance when weights are 1/sigma^2.
  std::vector<double> inv(static_cast<std::size_t>(p) * p, 0.0);
  for (int i = 0; i < p; ++i) inv[static_cast<std::size_t>(i) * p + i] = 1.0;
  for (int col = 0; col < p; ++col) {
    int piv = col;
    for (int r = col + 1; r < p; ++r)
      if (std::abs(a[static_cast<std::size_t>(r) * p + col]) >
          std::abs(a[static_cast<std::size_t>(piv) * p + col]))
        piv = r;
    if (std::abs(a[static_cast<std::size_t>(piv) * p + col]) < 1e-300)
      throw FitError("degenerate normal equations");
    if (piv != col)
      for (int c = 0; c < p; ++c) {
        std::swap(a[static_cast<std::size_t>(piv) * p + c],
                  a[static_cast<std::size_t>(col) * p + c]);
        std::swap(inv[static_cast<std::size_t>(piv) * p + c],
                  inv[static_cast<std::size_t>(col) * p + c]);
      }
    const double d = a[static_cast<std::size_t>(col) * p + col];
    for (int c = 0; c < p; ++c) {
      a[static_cast<std::size_t>(col) * p + c] /= d;
      inv[static_cast<std::size_t>(col) * p + c] /= d;
    }
    for (int r = 0; r < p; ++r) {
      if (r == col) continue;
      const double f = a[static_cast<std::size_t>(r) * p + col];
      if (f == 0.0) continue;
      for (int c = 0; c < p; ++c) {
        a[static_cast<std::size_t>(r) * p + c] -=
            f * a[static_cast<std::size_t>(col) * p + c];
        inv[static_cast<std::size_t>(r) * p + c] -=
            f * inv[static_cast<std::size_t>(col) * p + c];
      }
    }
  }

  PolyFit fit;
  fit.coef.assign(static_cast<std::size_t>(p), 0.0);
  for (int r = 0; r < p; ++r)
    for (int c = 0; c < p; ++c)
      fit.coef[static_cast<std::size_t>(r)] +=
          inv[static_cast<std::size_t>(r) * p + c] *
          rhs[static_cast<std::size_t>(c)];
  fit.cov = std::move(inv);

  double rss = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = 0.0, xk = 1.0;
    for (int k = 0; k < p; ++k) {
      pred += fit.coef[static_cast<std::size_t>(k)] * xk;
      xk *= x[i];
    }
    rss += w[i] * (y[i] - pred) * (y[i] - pred);
    wsum += w[i];
  }
  fit.weighted_rms = wsum > 0.0 ? std::sqrt(rss / wsum) : 0.0;
  return fit;
}

}  // namespace detail

struct CorrPoint {
  double x = 0.0;      // separation l, or control value for power laws
  double value = 0.0;  // may be signed; fits use |value|
  double sigma = 0.0;  // 0: unweighted
};

// Exponential decay length xi from log|value| vs separation, weighted
// linear regression over the window [l_lo, l_hi]. Points whose magnitude
// sits at or below `floor` cannot be log-transformed and are excluded; the
// fit needs at least three usable points and a decaying slope.
inline FitResult fit_correlation_length(std::span<const CorrPoint> corr,
                                        int l_lo = 1, int l_hi = 6,
                                        double floor = 1e-14) {
  if (l_hi < l_lo) throw FitError("correlation window is reversed");
  std::vector<double> xs, ys, ss;
  std::vector<int> dropped;
  for (const auto& pt : corr) {
    if (pt.x < l_lo - 1e-9 || pt.x > l_hi + 1e-9) continue;
    const double mag = std::abs(pt.value);
    if (mag <= floor) {
      dropped.push_back(static_cast<int>(std::lround(pt.x)));
      continue;
    }
    xs.push_back(pt.x);
    ys.push_back(std::log(mag));
    // sigma on log|c| by linear propagation.
    ss.push_back(pt.sigma > 0.0 ? pt.sigma / mag : 0.0);
  }
  if (xs.size() < 3) {
    std::string msg = "correlation-length fit needs at least 3 usable points "
                      "in window [" + std::to_string(l_lo) + ", " +
                      std::to_string(l_hi) + "], got " +
                      std::to_string(xs.size());
    if (!dropped.empty()) {
      msg += "; dropped separations at the magnitude floor:";
      for (int l : dropped) msg += " " + std::to_string(l);
    }
    throw FitError(msg);
  }
  const bool weighted = std::any_of(ss.begin(), ss.end(),
                                    [](double s) { return s > 0.0; });
  auto fit = detail::wls_polyfit(xs, ys,
                                 weighted ? std::span<const double>(ss)
                                          : std::span<const double>(),
                                 1);
  const double slope = fit.coef[1];
  if (!(slope < 0.0))
    throw FitError("correlator magnitudes do not decay over the window; "
                   "no decay length is defined");
  const double xi = -1.0 / slope;
  const double slope_err = std::sqrt(std::max(0.0, fit.cov[3]));
  FitResult out;
  out.params = {{"xi", xi, slope_err / (slope * slope)},
                {"amplitude", std::exp(fit.coef[0]),
                 std::exp(fit.coef[0]) * std::sqrt(std::max(0.0, fit.cov[0]))}};
  out.covariance = fit.cov;
  out.residual_norm = fit.weighted_rms;
  out.window_lo = l_lo;
  out.window_hi = l_hi;
  out.used_x = xs;
  return out;
}

// Power-law exponent mu from log-log regression of y against x over the
// window [x_lo, x_hi]; y is modelled as A x^(-mu).
inline FitResult fit_power_law(std::span<const CorrPoint> points, double x_lo,
                               double x_hi) {
  if (!(x_hi > x_lo)) throw FitError("power-law window is reversed");
  std::vector<double> xs, ys, ss;
  for (const auto& pt : points) {
    if (pt.x < x_lo * (1.0 - 1e-12) || pt.x > x_hi * (1.0 + 1e-12)) continue;
    if (!(pt.x > 0.0) || !(std::abs(pt.value) > 0.0)) continue;
    xs.push_back(std::log(pt.x));
    ys.push_back(std::log(std::abs(pt.value)));
    ss.push_back(pt.sigma > 0.0 ? pt.sigma / std::abs(pt.value) : 0.0);
  }
  if (xs.size() < 3)
    throw FitError("power-law fit needs at least 3 points in window, got " +
                   std::to_string(xs.size()));
  const bool weighted = std::any_of(ss.begin(), ss.end(),
                                    [](double s) { return s > 0.0; });
  auto fit = detail::wls_polyfit(xs, ys,
                                 weighted ? std::span<const double>(ss)
                                          : std::span<const double>(),
                                 1);
  FitResult out;
  out.params = {{"mu", -fit.coef[1], std::sqrt(std::max(0.0, fit.cov[3]))},
                {"log_amplitude", fit.coef[0],
                 std::sqrt(std::max(0.0, fit.cov[0]))}};
  out.covariance = fit.cov;
  out.residual_norm = fit.weighted_rms;
  out.window_lo = x_lo;
  out.window_hi = x_hi;
  out.used_x = xs;
  return out;
}

// P(k) proportional to lambda^k / k! restricted to even k; the normalizer
// is cosh(lambda). Evaluated in log space so large lambda and k are safe.
inline double even_poisson_pmf(double lambda, int k) {
  if (k < 0 || k % 2 != 0) return 0.0;
  if (!(lambda > 0.0)) return k == 0 ? 1.0 : 0.0;
  const double al = std::abs(lambda);
  // log cosh(lambda) without overflow.
  const double log_cosh =
      al + std::log1p(std::exp(-2.0 * al)) - std::numbers::ln2;
  const double log_p =
      k * std::log(lambda) - std::lgamma(static_cast<double>(k) + 1.0) -
      log_cosh;
  return std::exp(log_p);
}

// Reference pmf map over even k, truncated where the tail is negligible.
inline std::map<int, double> even_poisson_reference(double lambda,
                                                    int k_max = -1) {
  if (k_max < 0)
    k_max = static_cast<int>(std::ceil(lambda + 40.0 * std::sqrt(lambda + 1.0) +
                                       60.0));
  if (k_max % 2 != 0) ++k_max;
  std::map<int, double> pmf;
  for (int k = 0; k <= k_max; k += 2) pmf[k] = even_poisson_pmf(lambda, k);
  return pmf;
}

// Total variation distance between two pmfs over the union of supports.
inline double total_variation(const std::map<int, double>& p,
                              const std::map<int, double>& q) {
  double tv = 0.0;
  auto ip = p.begin();
  auto iq = q.begin();
  while (ip != p.end() || iq != q.end()) {
    if (iq == q.end() || (ip != p.end() && ip->first < iq->first)) {
      tv += std::abs(ip->second);
      ++ip;
    } else if (ip == p.end() || iq->first < ip->first) {
      tv += std::abs(iq->second);
      ++iq;
    } else {
      tv += std::abs(ip->second - iq->second);
      ++ip;
      ++iq;
    }
  }
  return 0.5 * tv;
}

// Variance-to-mean ratio; values above 1 flag super-Poissonian statistics.
inline double anomaly_ratio(double mean, double var) {
  if (!(mean > 0.0)) throw Error("anomaly ratio needs a positive mean");
  return var / mean;
}

enum class Detrend { none, mean, running_mean };

// Rectangular keeps on-bin peak frequencies unbiased; the Hann taper trades
// a wider main lobe for strongly suppressed leakage tails, which matters
// when weight near a large peak must not contaminate distant bins.
enum class Taper { rectangular, hann };

struct SpectrumResult {
  std::vector<double> freq_mhz;   // one-sided, k / (N dt)
  std::vector<double> magnitude;  // |X_k|
  double resolution_mhz = 0.0;    // 1 / window length
  double dominant_freq_mhz = 0.0; // argmax over k >= 1
  double detrended_power = 0.0;   // sum of squared detrended samples
  std::size_t n_samples = 0;
};

// One-sided discrete Fourier magnitude spectrum of a uniformly sampled
// series. Times are microseconds so frequencies come out in MHz.
inline SpectrumResult hold_spectrum(std::span<const double> t_us,
                                    std::span<const double> values,
                                    Detrend detrend = Detrend::mean,
                                    int running_window = 0,
                                    Taper taper = Taper::rectangular) {
  const std::size_t n = values.size();
  if (t_us.size() != n) throw Error("spectrum needs matching time and value arrays");
  if (n < 4) throw Error("spectrum needs at least 4 samples");
  const double dt = (t_us.back() - t_us.front()) / static_cast<double>(n - 1);
  if (!(dt > 0.0)) throw Error("spectrum needs increasing sample times");
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs((t_us[i] - t_us[i - 1]) - dt) > 1e-6 * dt + 1e-12)
      throw Error("spectrum needs uniformly spaced samples; gap at index " +
                  std::to_string(i));

  std::vector<double> x(values.begin(), values.end());
  if (detrend == Detrend::mean) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(n);
    for (double& v : x) v -= m;
  } else if (detrend == Detrend::running_mean) {
    int w = running_window > 0 ? running_window
                               : std::max<int>(3, static_cast<int>(n) / 8);
    if (w % 2 == 0) ++w;
    const int half = w / 2;
    std::vector<double> base(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = i >= static_cast<std::size_t>(half)
                                 ? i - static_cast<std::size_t>(half)
                                 : 0;
      const std::size_t hi = std::min(n - 1, i + static_cast<std::size_t>(half));
      double m = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) m += values[j];
      base[i] = m / static_cast<double>(hi - lo + 1);
    }
    for (std::size_t i = 0; i < n; ++i) x[i] -= base[i];
  }
  if (taper == Taper::hann) {
    for (std::size_t m = 0; m < n; ++m)
      x[m] *= 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi *
                                   static_cast<double>(m) /
                                   static_cast<double>(n - 1));
  }

  SpectrumResult out;
  out.n_samples = n;
  out.resolution_mhz = 1.0 / (dt * static_cast<double>(n));
  // Power of the series as transformed (post detrend and taper), so the
  // Parseval identity against the magnitudes holds for every option.
  for (double v : x) out.detrended_power += v * v;

  const std::size_t n_half = n / 2;
  out.freq_mhz.resize(n_half + 1);
  out.magnitude.resize(n_half + 1);
  for (std::size_t k = 0; k <= n_half; ++k) {
    double re = 0.0, im = 0.0;
    const double wk = -2.0 * std::numbers::pi * static_cast<double>(k) /
                      static_cast<double>(n);
    for (std::size_t m = 0; m < n; ++m) {
      const double ph = wk * static_cast<double>(m);
      re += x[m] * std::cos(ph);
      im += x[m] * std::sin(ph);
    }
    out.freq_mhz[k] = static_cast<double>(k) * out.resolution_mhz;
    out.magnitude[k] = std::hypot(re, im);
  }
  double best = -1.0;
  for (std::size_t k = 1; k <= n_half; ++k)
    if (out.magnitude[k] > best) {
      best = out.magnitude[k];
      out.dominant_freq_mhz = out.freq_mhz[k];
    }
  return out;
}

// Total spectral power reassembled from the one-sided magnitudes; equals
// detrended_power when the transform is exact (Parseval).
inline double spectrum_power(const SpectrumResult& s) {
  const std::size_t n = s.n_samples;
  const std::size_t n_half = n / 2;
  double acc = s.magnitude[0] * s.magnitude[0];
  for (std::size_t k = 1; k <= n_half; ++k) {
    const bool self_conjugate = (n % 2 == 0) && (k == n_half);
    const double m2 = s.magnitude[k] * s.magnitude[k];
    acc += self_conjugate ? m2 : 2.0 * m2;
  }
  return acc / static_cast<double>(n);
}

}  // namespace rydkz
