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

// Reference Schroedinger propagation, independent of the history-state
// machinery. Everything else in the library is checked against it.

#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "histsim/schedule.hpp"

namespace histsim {

inline constexpr std::size_t kDefaultSubsteps = 64;

/// An impulse at t_i has acted for every query time t >= t_i. The comparison
/// allows for round-off in grid times.
inline bool event_has_occurred(double t, double t_event) {
  return t >= t_event - 1e-12 * (1.0 + std::abs(t_event));
}

namespace detail {

// (U (x) I_rest) v for U acting on the leading factor of dimension u.rows().
inline Vector apply_leading(const Matrix& u, const Vector& v) {
  const Eigen::Index dq = u.rows();
  if (dq == 0 || v.size() % dq != 0) throw ValidationError("state does not factor over the system space");
  const Eigen::Index rest = v.size() / dq;
  Vector out(v.size());
  Eigen::Map<const Matrix> in(v.data(), rest, dq);
  Eigen::Map<Matrix> res(out.data(), rest, dq);
  res.noalias() = in * u.transpose();
  return out;
}

inline void check_leading_system(const StateVector& psi, std::size_t dq) {
  if (psi.factors().empty() || psi.factors().front().name != "Q" || psi.factors().front().dim != dq) {
    throw ValidationError("state must start with a system factor Q of dimension " + std::to_string(dq));
  }
}

inline std::size_t step_count(double span, std::size_t substeps_per_unit_time) {
  const double s = std::ceil(std::abs(span) * static_cast<double>(substeps_per_unit_time) - 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(s));
}

}  // namespace detail

/// exp(-i H tau) for a fixed hermitian H, reusing one eigendecomposition.
class SpectralPropagator {
 public:
  explicit SpectralPropagator(const Matrix& h) {
    if (hermiticity_defect(h) > kHermitianTol) throw ValidationError("generator is not hermitian");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
    energies_ = eig.eigenvalues();
    vectors_ = eig.eigenvectors();
  }

  Matrix operator()(double tau) const {
    const Vector phases = (energies_.cast<cplx>() * cplx(0.0, -tau)).array().exp().matrix();
    return vectors_ * phases.asDiagonal() * vectors_.adjoint();
  }

  const Eigen::VectorXd& energies() const { return energies_; }

 private:
  Eigen::VectorXd energies_;
  Matrix vectors_;
};

/// U(t, t0) on Q. Constant specs are exact; otherwise a product of midpoint
/// steps exp(-i H(t_mid) delta), time-ordered for t > t0 and anti-ordered
/// (stepping backwards) for t < t0.
inline Matrix propagator_matrix(const HamiltonianSpec& spec, double t, double t0,
                                std::size_t substeps_per_unit_time = kDefaultSubsteps) {
  if (substeps_per_unit_time < 1) throw ValidationError("substeps per unit time must be >= 1");
  const auto d = static_cast<Eigen::Index>(spec.dim());
  if (t == t0) return Matrix::Identity(d, d);
  if (spec.is_constant()) return SpectralPropagator(spec.matrix_at(t0))(t - t0);
  const std::size_t steps = detail::step_count(t - t0, substeps_per_unit_time);
  const double delta = (t - t0) / static_cast<double>(steps);
  Matrix u = Matrix::Identity(d, d);
  for (std::size_t s = 0; s < steps; ++s) {
    const double mid = t0 + (static_cast<double>(s) + 0.5) * delta;
    u = SpectralPropagator(spec.matrix_at(mid))(delta) * u;
  }
  return u;
}

inline StateVector evolve_const(const Operator& h, const StateVector& psi0, double t, double t0) {
  if (h.factors().size() != 1 || h.factors().front().name != "Q") {
    throw ValidationError("hamiltonian must act on Q alone");
  }
  detail::check_leading_system(psi0, h.dim());
  if (!h.is_hermitian()) throw ValidationError("hamiltonian is not hermitian");
  if (t == t0) return psi0;
  return StateVector(psi0.factors(), detail::apply_leading(SpectralPropagator(h.matrix())(t - t0), psi0.amplitudes()));
}

/// Time-dependent evolution; spectator factors after Q (memories) are left alone.
inline StateVector evolve_td(const HamiltonianSpec& spec, const StateVector& psi0, double t, double t0,
                             std::size_t substeps_per_unit_time = kDefaultSubsteps) {
  detail::check_leading_system(psi0, spec.dim());
  return StateVector(psi0.factors(),
                     detail::apply_leading(propagator_matrix(spec, t, t0, substeps_per_unit_time), psi0.amplitudes()));
}

/// Instantaneous unitary kick at `time`, on Q or on Q and one memory.
struct ImpulseEvent {
  double time = 0.0;
  Operator unitary;
};

/// Free evolution interleaved with impulse unitaries. Impulses later than t
/// are not applied; for t < t0 the state is evolved backwards freely.
inline StateVector evolve_schedule(const HamiltonianSpec& spec, const std::vector<ImpulseEvent>& impulses,
                                   const StateVector& psi0, double t, double t0,
                                   std::size_t substeps_per_unit_time = kDefaultSubsteps) {
  detail::check_leading_system(psi0, spec.dim());
  for (std::size_t i = 0; i < impulses.size(); ++i) {
    if (i > 0 && !(impulses[i].time > impulses[i - 1].time)) {
      throw ValidationError("impulse times must be strictly increasing");
    }
    if (!(impulses[i].time > t0)) throw ValidationError("impulse at or before the initial time t0");
    if (!impulses[i].unitary.is_unitary()) throw ValidationError("impulse operator is not certified unitary");
  }
  Vector v = psi0.amplitudes();
  double now = t0;
  for (const auto& imp : impulses) {
    if (!event_has_occurred(t, imp.time)) break;
    v = detail::apply_leading(propagator_matrix(spec, imp.time, now, substeps_per_unit_time), v);
    v = embed(imp.unitary, psi0.factors()).matrix() * v;
    now = imp.time;
  }
  v = detail::apply_leading(propagator_matrix(spec, t, now, substeps_per_unit_time), v);
  return StateVector(psi0.factors(), std::move(v));
}

/// memory label -> outcome index (index m addresses the ready slot).
using Assignments = std::map<std::string, std::size_t>;

/// Probability of the assigned memory readings at time t, by direct
/// composition of Kraus operators on Q. Unassigned outcomes are summed over.
/// Assigned memories whose event lies after t contribute |<a|r>|^2.
inline double oracle_chain_prob(const MeasurementSchedule& schedule, const StateVector& psi0, const Assignments& assignments,
                                double t, double t0, std::size_t substeps_per_unit_time = kDefaultSubsteps) {
  const auto& spec = schedule.base();
  if (psi0.factors().size() != 1) throw ValidationError("oracle initial state must live on Q alone");
  detail::check_leading_system(psi0, spec.dim());
  for (const auto& [label, a] : assignments) {
    const auto& e = schedule.event_for(label);
    if (a >= e.memory.dim()) throw ValidationError("outcome index out of range for memory " + label);
  }
  const auto& events = schedule.events();
  if (!events.empty() && !(events.front().time > t0)) {
    throw ValidationError("initial time must precede the first measurement");
  }

  double ready_factor = 1.0;
  std::vector<const MeasurementEvent*> active;
  for (const auto& e : events) {
    if (event_has_occurred(t, e.time)) {
      active.push_back(&e);
    } else if (auto it = assignments.find(e.memory.label()); it != assignments.end()) {
      ready_factor *= std::norm(e.memory.ready()(static_cast<Eigen::Index>(it->second)));
    }
  }
  if (ready_factor == 0.0) return 0.0;

  // Depth-first over the outcome tree of the events that have happened.
  std::function<double(std::size_t, const Vector&, double)> walk = [&](std::size_t i, const Vector& v,
                                                                       double now) -> double {
    if (i == active.size()) {
      return detail::apply_leading(propagator_matrix(spec, t, now, substeps_per_unit_time), v).squaredNorm();
    }
    const auto& e = *active[i];
    const Vector here = detail::apply_leading(propagator_matrix(spec, e.time, now, substeps_per_unit_time), v);
    const auto it = assignments.find(e.memory.label());
    if (it != assignments.end()) {
      if (it->second >= e.instrument.outcomes()) return 0.0;  // ready slot is empty after the event
      return walk(i + 1, e.instrument.kraus(it->second).matrix() * here, e.time);
    }
    double sum = 0.0;
    for (std::size_t a = 0; a < e.instrument.outcomes(); ++a) {
      sum += walk(i + 1, e.instrument.kraus(a).matrix() * here, e.time);
    }
    return sum;
  };
  return ready_factor * walk(0, psi0.amplitudes(), t0);
}

}  // namespace histsim
