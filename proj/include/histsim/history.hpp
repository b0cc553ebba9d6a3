// Copyright 2026 The histsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Discretized global history state. Conditioning it on a clock reading gives
// the system state at that time; conditioning on a clock frequency gives a
// stationary component. Propagators and constraint residuals live here too.

#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "histsim/clock_grid.hpp"
#include "histsim/schrodinger.hpp"

namespace histsim {

struct ConditioningTolerances {
  double cond = 1e-8;  // minimum |phi_k| for conditioning on a clock reading
  double null = 1e-8;  // frequency slices below this norm count as zero
  double eig = 1e-6;   // relative eigen-residual for surviving frequency slices
};

/// Block form of the history state: branch_k = phi_k |psi(t_k)> for every
/// grid point. The unit conditional states are stored alongside the envelope,
/// so branches are never divided back out where phi vanishes.
class HistoryState {
 public:
  HistoryState() = default;

  HistoryState(Envelope envelope, Factors system, std::vector<Vector> states, double t0,
               std::map<std::string, double> event_times = {})
      : envelope_(std::move(envelope)),
        system_(std::move(system)),
        states_(std::move(states)),
        t0_(t0),
        event_times_(std::move(event_times)) {
    detail::validate_factors(system_);
    if (states_.size() != grid().size()) throw ValidationError("history needs one state per clock grid point");
    const auto d = static_cast<Eigen::Index>(detail::total_dim(system_));
    for (const auto& s : states_) {
      if (s.size() != d) throw ValidationError("history branch has the wrong dimension");
    }
  }

  const ClockGrid& grid() const { return envelope_.grid(); }
  const Envelope& envelope() const { return envelope_; }
  const Factors& system_factors() const { return system_; }
  std::size_t system_dim() const { return detail::total_dim(system_); }
  double t0() const { return t0_; }
  /// memory label -> time of the measurement writing into it.
  const std::map<std::string, double>& event_times() const { return event_times_; }

  /// |psi(t_k)> as stored (unit norm for a physical history).
  const Vector& state(std::size_t k) const { return states_.at(k); }

  StateVector branch(std::size_t k) const { return StateVector(system_, envelope_[k] * states_.at(k)); }

  /// sum_k |branch_k|^2, equal to 1 for a normalized history.
  double squared_norm() const {
    double s = 0.0;
    for (std::size_t k = 0; k < states_.size(); ++k) s += std::norm(envelope_[k]) * states_[k].squaredNorm();
    return s;
  }

  /// Flat vector on T (x) system, for small spaces.
  StateVector flatten() const {
    const auto d = static_cast<Eigen::Index>(system_dim());
    Vector v(static_cast<Eigen::Index>(states_.size()) * d);
    for (std::size_t k = 0; k < states_.size(); ++k) {
      v.segment(static_cast<Eigen::Index>(k) * d, d) = envelope_[k] * states_[k];
    }
    Factors f{grid().label()};
    f.insert(f.end(), system_.begin(), system_.end());
    return StateVector(std::move(f), std::move(v));
  }

  /// Copy with the conditional state at grid index k replaced. Used to inject
  /// faults when testing the verification machinery.
  HistoryState with_state(std::size_t k, Vector replacement) const {
    HistoryState out = *this;
    if (replacement.size() != out.states_.at(k).size()) throw ValidationError("replacement branch has wrong size");
    out.states_[k] = std::move(replacement);
    return out;
  }

 private:
  Envelope envelope_;
  Factors system_;
  std::vector<Vector> states_;
  double t0_ = 0.0;
  std::map<std::string, double> event_times_;
};

namespace detail {

inline void check_unit_system_state(const StateVector& psi0, std::size_t dq) {
  if (psi0.factors().size() != 1) throw ValidationError("initial state must live on Q alone");
  check_leading_system(psi0, dq);
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw ValidationError("initial state is not unit norm");
}

}  // namespace detail

/// branch_k = phi_k U(t_k, t0) psi0, i.e. the dilation unitary acting on
/// |phi>_T (x) psi0.
inline HistoryState build_history(const HamiltonianSpec& spec, const StateVector& psi0, double t0,
                                  const Envelope& envelope, std::size_t substeps_per_unit_time = kDefaultSubsteps) {
  const auto& grid = envelope.grid();
  if (!grid.contains(t0)) throw ValidationError("initial time t0 lies outside the clock window");
  detail::check_unit_system_state(psi0, spec.dim());
  std::vector<Vector> states(grid.size());
  if (spec.is_constant()) {
    const SpectralPropagator u(spec.matrix_at(t0));
    for (std::size_t k = 0; k < grid.size(); ++k) states[k] = u(grid.time(k) - t0) * psi0.amplitudes();
  } else {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      states[k] = propagator_matrix(spec, grid.time(k), t0, substeps_per_unit_time) * psi0.amplitudes();
    }
  }
  return HistoryState(envelope, psi0.factors(), std::move(states), t0);
}

/// <t|Phi>> / phi(t), t snapped to the nearest grid point.
inline StateVector condition_on_time(const HistoryState& psi, double t, double eps_cond = 1e-8) {
  const std::size_t k = psi.grid().snap(t);
  const cplx w = psi.envelope()[k];
  if (std::abs(w) < eps_cond) {
    throw NumericalGuardError("conditioning on null-probability time t = " + std::to_string(psi.grid().time(k)));
  }
  return StateVector(psi.system_factors(), psi.branch(k).amplitudes() / w);
}

/// <omega_j|Psi>>, unnormalized. Only defined for flat envelopes.
inline StateVector condition_on_frequency(const HistoryState& psi, long j) {
  if (!psi.envelope().is_flat()) {
    throw ValidationError("frequency conditioning requires a flat envelope");
  }
  const auto f = frequency_vector(psi.grid(), j);
  Vector out = Vector::Zero(static_cast<Eigen::Index>(psi.system_dim()));
  for (std::size_t k = 0; k < psi.grid().size(); ++k) {
    out += std::conj(f.amplitudes()(static_cast<Eigen::Index>(k))) * psi.branch(k).amplitudes();
  }
  return StateVector(psi.system_factors(), std::move(out));
}

/// |H v + omega v| / |v|.
inline double eigen_residual(const Matrix& h, const Vector& v, double omega) {
  const double n = v.norm();
  if (n == 0.0) throw NumericalGuardError("eigen-residual of the zero vector");
  return (h * v + omega * v).norm() / n;
}

struct FrequencySlice {
  long index = 0;
  double omega = 0.0;
  double norm = 0.0;
  double eigen_residual = 0.0;  // only meaningful when !is_null
  bool is_null = false;
  bool is_eigenvector = false;
};

/// Either the slice vanishes or it solves H v = -omega v.
inline FrequencySlice classify_frequency(const HistoryState& psi, const HamiltonianSpec& spec, long j,
                                         const ConditioningTolerances& tol = {}) {
  if (!spec.is_constant()) throw ValidationError("frequency classification needs a constant hamiltonian");
  const auto slice = condition_on_frequency(psi, j);
  FrequencySlice out;
  out.index = j;
  out.omega = psi.grid().frequency(j);
  out.norm = slice.norm();
  out.is_null = out.norm <= tol.null;
  if (!out.is_null) {
    out.eigen_residual = eigen_residual(spec.matrix_at(psi.t0()), slice.amplitudes(), out.omega);
    out.is_eigenvector = out.eigen_residual <= tol.eig;
  }
  return out;
}

/// <F| U(t_F, t_I) |I> read off a flat-envelope history started at t_I. The
/// factor sqrt(N) undoes the discrete clock-basis normalization.
inline cplx propagator(const HamiltonianSpec& spec, const StateVector& initial, double t_initial,
                       const StateVector& final_state, double t_final, const ClockGrid& grid,
                       std::size_t substeps_per_unit_time = kDefaultSubsteps) {
  detail::check_unit_system_state(final_state, spec.dim());
  if (!grid.contains(t_final)) throw ValidationError("final time lies outside the clock window");
  const auto psi = build_history(spec, initial, t_initial, flat_envelope(grid), substeps_per_unit_time);
  const std::size_t k = grid.snap(t_final);
  return std::sqrt(static_cast<double>(grid.size())) * final_state.amplitudes().dot(psi.branch(k).amplitudes());
}

inline constexpr std::size_t kMaxDenseConstraintDim = 4096;

/// Omega (x) I + sum_k |t_k><t_k| (x) H(t_k) on T (x) Q.
inline Operator constraint_operator(const HamiltonianSpec& spec, const ClockGrid& grid) {
  const std::size_t n = grid.size();
  const std::size_t d = spec.dim();
  if (n * d > kMaxDenseConstraintDim) {
    throw ValidationError("constraint operator of dimension " + std::to_string(n * d) + " exceeds dense limit " +
                          std::to_string(kMaxDenseConstraintDim));
  }
  const Operator omega = omega_operator(grid);
  const auto dd = static_cast<Eigen::Index>(d);
  Matrix j = detail::kron_matrix(omega.matrix(), Matrix::Identity(dd, dd));
  for (std::size_t k = 0; k < n; ++k) {
    j.block(static_cast<Eigen::Index>(k) * dd, static_cast<Eigen::Index>(k) * dd, dd, dd) += spec.matrix_at(grid.time(k));
  }
  return Operator({grid.label(), spec.label()}, std::move(j));
}

/// Real eigenvalues of the constraint operator, ascending.
inline Eigen::VectorXd constraint_spectrum(const HamiltonianSpec& spec, const ClockGrid& grid) {
  const auto j = constraint_operator(spec, grid);
  if (!j.is_hermitian()) throw NumericalGuardError("constraint operator lost hermiticity");
  return Eigen::SelfAdjointEigenSolver<Matrix>(j.matrix(), Eigen::EigenvaluesOnly).eigenvalues();
}

struct ConstraintResidual {
  double plain = 0.0;        // |J Phi>>|
  double regularized = 0.0;  // |(J + i phi'/phi (x) I) Phi>>|
};

/// Residuals of the constraint without forming J: Omega is applied spectrally
/// along the clock for every system component.
inline ConstraintResidual constraint_residual(const HistoryState& psi, const HamiltonianSpec& spec) {
  if (psi.system_factors() != Factors{spec.label()}) {
    throw ValidationError("history and hamiltonian live on different system spaces");
  }
  const auto& grid = psi.grid();
  const std::size_t n = grid.size();
  const auto d = static_cast<Eigen::Index>(spec.dim());

  std::vector<Vector> j_branch(n);
  for (std::size_t k = 0; k < n; ++k) j_branch[k] = spec.matrix_at(grid.time(k)) * psi.branch(k).amplitudes();
  std::vector<cplx> column(n);
  for (Eigen::Index s = 0; s < d; ++s) {
    for (std::size_t k = 0; k < n; ++k) column[k] = psi.envelope()[k] * psi.state(k)(s);
    const auto omega_col = apply_omega(grid, column);
    for (std::size_t k = 0; k < n; ++k) j_branch[k](s) += omega_col[k];
  }
  // i phi'/phi times phi psi = -(Omega phi) psi, with phi' taken spectrally.
  const auto omega_phi = apply_omega(grid, psi.envelope().weights());

  ConstraintResidual out;
  double plain = 0.0, reg = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    plain += j_branch[k].squaredNorm();
    reg += (j_branch[k] - omega_phi[k] * psi.state(k)).squaredNorm();
  }
  out.plain = std::sqrt(plain);
  out.regularized = std::sqrt(reg);
  return out;
}

inline ConstraintResidual constraint_residual(const HistoryState& psi, const HamiltonianSpec& spec,
                                              const ClockGrid& grid) {
  if (!(grid == psi.grid())) throw ValidationError("history was built on a different clock grid");
  return constraint_residual(psi, spec);
}

}  // namespace histsim
