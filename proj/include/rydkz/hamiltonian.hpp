// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rydkz/basis.hpp"
#include "rydkz/errors.hpp"
#include "rydkz/geometry.hpp"
#include "rydkz/state.hpp"
#include "rydkz/waveform.hpp"

namespace rydkz {

// Matrix-free driven-chain Hamiltonian over an enumerated basis, in units
// of angular frequency (the operator applied is H/hbar).
//
//   H(t)/hbar = (omega(t)/2) sum_j (|g><r|_j + h.c.)
//             - delta(t) sum_j n_j
//             + sum_{j<k} (c6 / r_jk^6) n_j n_k
//
// The diagonal (interaction and occupation) is precomputed per basis state.
// The drive term is a gather over single-bit flips that stay inside the
// basis, stored as a CSR adjacency table so apply() is two tight loops.
class RydbergHamiltonian {
 public:
  RydbergHamiltonian(std::shared_ptr<const ConstrainedBasis> basis,
                     AtomGeometry geometry, RydbergParams params,
                     DriveProtocol protocol,
                     double interaction_cutoff_um = 0.0)
      : basis_(std::move(basis)),
        geometry_(std::move(geometry)),
        params_(params),
        protocol_(std::move(protocol)) {
    if (!basis_) throw Error("hamiltonian needs a basis");
    const int L = basis_->n_sites;
    if (static_cast<int>(geometry_.size()) != L)
      throw Error("geometry has " + std::to_string(geometry_.size()) +
                  " atoms but the basis has " + std::to_string(L) + " sites");
    geometry_.validate();
    params_.validate();

    // Pairwise couplings c6/r^6; an optional cutoff zeroes long tails.
    std::vector<double> coupling(static_cast<std::size_t>(L) * L, 0.0);
    for (int j = 0; j < L; ++j)
      for (int k = j + 1; k < L; ++k) {
        const double r = geometry_.distance_um(j, k);
        if (interaction_cutoff_um > 0.0 && r > interaction_cutoff_um) continue;
        const double v = params_.c6 / std::pow(r, 6.0);
        coupling[static_cast<std::size_t>(j) * L + k] = v;
      }

    const std::size_t dim = basis_->dim();
    diag_interaction_.resize(dim);
    n_excited_.resize(dim);
    flip_offsets_.resize(dim + 1);

    for (std::size_t i = 0; i < dim; ++i) {
      const bitmask_t s = basis_->states[i];
      n_excited_[i] = static_cast<std::uint8_t>(std::popcount(s));
      double v = 0.0;
      for (bitmask_t rest = s; rest;) {
        const int j = std::countr_zero(rest);
        rest &= rest - 1;
        for (bitmask_t rest2 = rest; rest2;) {
          const int k = std::countr_zero(rest2);
          rest2 &= rest2 - 1;
          v += coupling[static_cast<std::size_t>(j) * L + k];
        }
      }
      diag_interaction_[i] = v;
    }

    std::size_t nnz = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      flip_offsets_[i] = static_cast<std::uint64_t>(nnz);
      const bitmask_t s = basis_->states[i];
      for (int j = 0; j < L; ++j) {
        const bitmask_t t = s ^ (1ULL << j);
        if (auto idx = basis_->try_index_of(t)) {
          flip_targets_.push_back(static_cast<std::uint32_t>(*idx));
          ++nnz;
        }
      }
    }
    flip_offsets_[dim] = static_cast<std::uint64_t>(nnz);

    double mv = 0.0, mn = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      mv += diag_interaction_[i];
      mn += n_excited_[i];
    }
    mean_interaction_ = mv / static_cast<double>(dim);
    mean_occupation_ = mn / static_cast<double>(dim);
  }

  std::size_t dim() const { return basis_->dim(); }
  const ConstrainedBasis& basis() const { return *basis_; }
  std::shared_ptr<const ConstrainedBasis> basis_ptr() const { return basis_; }
  const AtomGeometry& geometry() const { return geometry_; }
  const RydbergParams& params() const { return params_; }
  const DriveProtocol& protocol() const { return protocol_; }

  double diagonal(std::size_t i, double delta) const {
    return diag_interaction_[i] - delta * n_excited_[i];
  }

  // Mean diagonal at detuning delta; subtracting it as an energy shift
  // roughly halves the spectral radius the integrator has to resolve.
  double mean_diagonal(double delta) const {
    return mean_interaction_ - delta * mean_occupation_;
  }

  double mean_interaction() const { return mean_interaction_; }
  double mean_occupation() const { return mean_occupation_; }

  // out = (H(omega, delta)/hbar - shift) in. Works on real or complex
  // vectors; every matrix element is real.
  template <class Scalar>
  void apply_fixed(double omega, double delta, std::span<const Scalar> in,
                   std::span<Scalar> out, double shift = 0.0) const {
    const std::size_t dim = basis_->dim();
    if (in.size() != dim || out.size() != dim)
      throw Error("apply: vector length does not match basis dimension");
    const double half_omega = 0.5 * omega;
    for (std::size_t i = 0; i < dim; ++i) {
      Scalar acc{};
      for (std::uint64_t k = flip_offsets_[i]; k < flip_offsets_[i + 1]; ++k)
        acc += in[flip_targets_[k]];
      out[i] = (diag_interaction_[i] - delta * n_excited_[i] - shift) * in[i] +
               half_omega * acc;
    }
  }

  // out = (H(t)/hbar) in, with the drive evaluated from the protocol.
  template <class Scalar>
  void apply(double t, std::span<const Scalar> in,
             std::span<Scalar> out) const {
    apply_fixed<Scalar>(protocol_.omega(t), protocol_.delta(t), in, out);
  }

  double expectation_energy(double t, std::span<const cplx> psi) const {
    cvec tmp(psi.size());
    apply<cplx>(t, psi, tmp);
    double e = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i)
      e += (std::conj(psi[i]) * tmp[i]).real();
    return e;
  }

 private:
  std::shared_ptr<const ConstrainedBasis> basis_;
  AtomGeometry geometry_;
  RydbergParams params_;
  DriveProtocol protocol_;
  std::vector<double> diag_interaction_;
  std::vector<std::uint8_t> n_excited_;
  std::vector<std::uint64_t> flip_offsets_;
  std::vector<std::uint32_t> flip_targets_;
  double mean_interaction_ = 0.0;
  double mean_occupation_ = 0.0;
};

}  // namespace rydkz
