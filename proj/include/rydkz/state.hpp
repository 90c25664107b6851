// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <memory>
#include <vector>

#include "rydkz/basis.hpp"
#include "rydkz/errors.hpp"

namespace rydkz {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;

struct QuantumState {
  std::shared_ptr<const ConstrainedBasis> basis;
  cvec amplitudes;

  std::size_t dim() const { return amplitudes.size(); }

  double norm() const {
    double s = 0.0;
    for (const cplx& a : amplitudes) s += std::norm(a);
    return std::sqrt(s);
  }

  void normalize() {
    const double n = norm();
    if (n <= 0.0) throw Error("cannot normalize a zero state");
    for (cplx& a : amplitudes) a /= n;
  }

  void validate() const {
    if (!basis) throw Error("state has no basis");
    if (amplitudes.size() != basis->dim())
      throw Error("state length does not match basis dimension");
  }
};

// All atoms in the ground state: the sweep's initial condition.
inline QuantumState vacuum_state(std::shared_ptr<const ConstrainedBasis> basis) {
  QuantumState psi;
  psi.basis = std::move(basis);
  psi.amplitudes.assign(psi.basis->dim(), cplx(0.0, 0.0));
  psi.amplitudes[psi.basis->index_of(0)] = cplx(1.0, 0.0);
  return psi;
}

}  // namespace rydkz
