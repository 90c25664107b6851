// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rydkz/errors.hpp"
#include "rydkz/hamiltonian.hpp"
#include "rydkz/rng.hpp"

namespace rydkz {

struct LanczosOptions {
  int max_iterations = 400;
  double tolerance = 1e-11;  // residual threshold relative to |H| scale
  std::uint64_t seed = 0x1db5c7a3ULL;
};

struct LanczosEigenpair {
  double value = 0.0;
  std::vector<double> vector;
  int iterations = 0;
  double residual = 0.0;
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double>& a) {
  return std::sqrt(dot(a, a));
}

}  // namespace detail

// Lowest eigenpair of a real symmetric operator by Lanczos iteration with
// full reorthogonalization. An optional deflation vector confines the
// iteration to its orthogonal complement, which is how the second-lowest
// level is found even when the ground level is (near-)degenerate.
template <class MatVec>
inline LanczosEigenpair lowest_eigenpair(
    MatVec&& matvec, std::size_t dim, double scale,
    const LanczosOptions& opts = {},
    const std::vector<double>* deflate = nullptr) {
  if (dim < 1) throw Error("eigensolver needs a nonempty space");
  if (dim == 1) {
    std::vector<double> unit{1.0}, out(1);
    matvec(unit, out);
    return {out[0], {1.0}, 0, 0.0};
  }

  const double tol_abs = opts.tolerance * std::max(1.0, scale);
  const int m_max = static_cast<int>(
      std::min<std::size_t>(dim, static_cast<std::size_t>(opts.max_iterations)));

  auto project_out = [&](std::vector<double>& v) {
    if (!deflate) return;
    const double c = detail::dot(*deflate, v);
    for (std::size_t i = 0; i < dim; ++i) v[i] -= c * (*deflate)[i];
  };

  // Deterministic random start vector, projected and normalized.
  std::vector<double> v(dim);
  Rng rng(opts.seed);
  for (double& x : v) x = rng.uniform() - 0.5;
  project_out(v);
  double nv = detail::norm2(v);
  if (nv < 1e-12) throw EigensolverError("start vector vanished after deflation");
  for (double& x : v) x /= nv;

  std::vector<std::vector<double>> basis_vecs;
  std::vector<double> alpha, beta;
  std::vector<double> w(dim);

  basis_vecs.push_back(v);
  double best_value = 0.0, best_residual = 0.0;
  Eigen::VectorXd ritz;

  for (int j = 0; j < m_max; ++j) {
    matvec(basis_vecs.back(), w);
    project_out(w);
    const double a = detail::dot(basis_vecs.back(), w);
    alpha.push_back(a);
    for (std::size_t i = 0; i < dim; ++i) w[i] -= a * basis_vecs.back()[i];
    if (j > 0)
      for (std::size_t i = 0; i < dim; ++i)
        w[i] -= beta.back() * basis_vecs[basis_vecs.size() - 2][i];
    // Full reorthogonalization keeps the Krylov basis numerically
    // orthogonal; without it spurious eigenvalue copies appear.
    for (const auto& q : basis_vecs) {
      const double c = detail::dot(q, w);
      for (std::size_t i = 0; i < dim; ++i) w[i] -= c * q[i];
    }
    const double b = detail::norm2(w);

    // Ritz values of the projected tridiagonal matrix.
    const int m = static_cast<int>(alpha.size());
    Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), m);
    Eigen::VectorXd sub = m > 1 ? Eigen::Map<const Eigen::VectorXd>(
                                      beta.data(), m - 1)
                                : Eigen::VectorXd();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    best_value = es.eigenvalues()(0);
    ritz = es.eigenvectors().col(0);
    best_residual = std::abs(b * ritz(m - 1));

    if (best_residual <= tol_abs || b <= tol_abs ||
        m == static_cast<int>(dim)) {
      std::vector<double> evec(dim, 0.0);
      for (int i = 0; i < m; ++i)
        for (std::size_t g = 0; g < dim; ++g)
          evec[g] += ritz(i) * basis_vecs[static_cast<std::size_t>(i)][g];
      const double en = detail::norm2(evec);
      for (double& x : evec) x /= en;
      return {best_value, std::move(evec), m, best_residual};
    }

    beta.push_back(b);
    for (std::size_t i = 0; i < dim; ++i) w[i] /= b;
    basis_vecs.push_back(w);
  }

  throw EigensolverError(
      "no convergence after " + std::to_string(m_max) +
      " iterations (residual " + std::to_string(best_residual) +
      ", threshold " + std::to_string(tol_abs) + ")");
}

struct GapResult {
  double e0 = 0.0;  // rad/us
  double e1 = 0.0;
  double gap = 0.0;       // rad/us
  double gap_mhz = 0.0;   // gap / 2 pi, the linear-frequency gap
  int iterations = 0;
};

// Two lowest levels of H(omega, delta) and their spacing. The second run
// is deflated against the ground vector so a degenerate ground pair is
// reported as gap = 0 instead of being missed.
inline GapResult spectral_gap(const RydbergHamiltonian& h, double omega,
                              double delta, const LanczosOptions& opts = {}) {
  const std::size_t dim = h.dim();
  if (dim < 2) throw Error("spectral gap needs at least two basis states");
  double scale = std::abs(omega) * h.basis().n_sites;
  for (std::size_t i = 0; i < dim; ++i)
    scale = std::max(scale, std::abs(h.diagonal(i, delta)));
  auto matvec = [&](const std::vector<double>& in, std::vector<double>& out) {
    h.apply_fixed<double>(omega, delta, in, out);
  };
  LanczosOptions o0 = opts;
  auto ground = lowest_eigenpair(matvec, dim, scale, o0);
  LanczosOptions o1 = opts;
  o1.seed = derive_seed(opts.seed, {1});
  auto excited = lowest_eigenpair(matvec, dim, scale, o1, &ground.vector);
  GapResult out;
  out.e0 = ground.value;
  out.e1 = excited.value;
  out.gap = excited.value - ground.value;
  out.gap_mhz = out.gap / kTwoPi;
  out.iterations = ground.iterations + excited.iterations;
  return out;
}

}  // namespace rydkz
