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

// Von Neumann measurements inside the history state: dilation of Kraus
// instruments into system-memory unitaries, measured histories, and the
// probabilities read off them by projecting on clock and memory states.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "histsim/history.hpp"

namespace histsim {

/// Order in which standard basis vectors are fed to the orthonormal
/// completion of the dilation. Observable statistics do not depend on it.
enum class Completion { kForward, kReverse };

namespace detail {

// Appends standard basis vectors, orthogonalized twice against everything
// already present, until `cols` spans the full space.
inline Matrix complete_orthonormal(const Matrix& cols, Completion order) {
  const Eigen::Index d = cols.rows();
  Matrix out(d, d);
  out.leftCols(cols.cols()) = cols;
  Eigen::Index have = cols.cols();
  for (Eigen::Index c = 0; c < d && have < d; ++c) {
    const Eigen::Index idx = order == Completion::kForward ? c : d - 1 - c;
    Vector v = Vector::Zero(d);
    v(idx) = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < have; ++j) v -= out.col(j).dot(v) * out.col(j);
    }
    const double n = v.norm();
    if (n > 1e-6) out.col(have++) = v / n;
  }
  if (have != d) throw NumericalGuardError("orthonormal completion failed");
  return out;
}

}  // namespace detail

/// A unitary V on Q (x) M with V (psi (x) |r>) = sum_a K_a psi (x) |a>.
inline Operator dilate_instrument(const KrausInstrument& instrument, const MemorySpec& memory,
                                  Completion order = Completion::kForward) {
  if (memory.dim() < instrument.outcomes() + 1) {
    throw ValidationError("memory " + memory.label() + " is too small for the instrument");
  }
  const auto dq = static_cast<Eigen::Index>(instrument.system_dim());
  const auto dm = static_cast<Eigen::Index>(memory.dim());
  Matrix in(dq * dm, dq), out = Matrix::Zero(dq * dm, dq);
  for (Eigen::Index q = 0; q < dq; ++q) {
    Vector e = Vector::Zero(dq);
    e(q) = 1.0;
    in.col(q) = detail::kron_vector(e, memory.ready());
    for (std::size_t a = 0; a < instrument.outcomes(); ++a) {
      const Vector ka = instrument.kraus(a).matrix().col(q);
      for (Eigen::Index p = 0; p < dq; ++p) out(p * dm + static_cast<Eigen::Index>(a), q) = ka(p);
    }
  }
  const Matrix b_in = detail::complete_orthonormal(in, order);
  const Matrix b_out = detail::complete_orthonormal(out, order);
  return Operator::unitary({{"Q", static_cast<std::size_t>(dq)}, memory.space()}, b_out * b_in.adjoint());
}

inline std::vector<ImpulseEvent> schedule_impulses(const MeasurementSchedule& schedule,
                                                   Completion order = Completion::kForward) {
  const auto full = schedule.system_factors();
  std::vector<ImpulseEvent> out;
  for (const auto& e : schedule.events()) {
    out.push_back({e.time, embed(dilate_instrument(e.instrument, e.memory, order), full)});
  }
  return out;
}

/// psi0 (x) |r_1> (x) ... (x) |r_N> in canonical factor order.
inline StateVector with_ready_memories(const MeasurementSchedule& schedule, const StateVector& psi0) {
  StateVector v = psi0;
  for (const auto& e : schedule.events()) v = kron(v, StateVector({e.memory.space()}, e.memory.ready()));
  return v;
}

/// branch_k = phi_k times the scheduled evolution of psi0 (x) ready states.
inline HistoryState build_measured_history(const MeasurementSchedule& schedule, const StateVector& psi0, double t0,
                                           const Envelope& envelope,
                                           std::size_t substeps_per_unit_time = kDefaultSubsteps,
                                           Completion order = Completion::kForward) {
  const auto& grid = envelope.grid();
  if (!grid.contains(t0)) throw ValidationError("initial time t0 lies outside the clock window");
  detail::check_unit_system_state(psi0, schedule.base().dim());
  std::map<std::string, double> times;
  for (const auto& e : schedule.events()) {
    if (!grid.contains(e.time)) throw ValidationError("measurement time lies outside the clock window");
    if (!(e.time > t0)) throw ValidationError("initial time must precede every measurement");
    times[e.memory.label()] = e.time;
  }
  const auto impulses = schedule_impulses(schedule, order);
  const auto start = with_ready_memories(schedule, psi0);
  std::vector<Vector> states(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    states[k] = evolve_schedule(schedule.base(), impulses, start, grid.time(k), t0, substeps_per_unit_time).amplitudes();
  }
  return HistoryState(envelope, start.factors(), std::move(states), t0, std::move(times));
}

namespace detail {

inline void check_memory_assignments(const HistoryState& psi, const Assignments& assignments) {
  for (const auto& [label, a] : assignments) {
    if (label.empty() || label[0] != 'M') throw ValidationError("'" + label + "' is not a memory register");
    const auto pos = factor_position(psi.system_factors(), label);
    if (a >= psi.system_factors()[pos].dim) {
      throw ValidationError("outcome " + std::to_string(a) + " out of range for memory " + label);
    }
  }
}

inline std::size_t conditioning_index(const HistoryState& psi, double t, double eps_cond) {
  const std::size_t k = psi.grid().snap(t);
  if (std::abs(psi.envelope()[k]) < eps_cond) {
    throw NumericalGuardError("conditioning on null-probability time t = " + std::to_string(psi.grid().time(k)));
  }
  return k;
}

}  // namespace detail

/// |(<t| (x) <a_1| (x) ...) Psi>>|^2 / |phi(t)|^2. The envelope weight is
/// divided out so the value is the probability conditioned on the clock.
inline double joint_prob(const HistoryState& psi, const Assignments& assignments, double t, double eps_cond = 1e-8) {
  detail::check_memory_assignments(psi, assignments);
  const std::size_t k = detail::conditioning_index(psi, t, eps_cond);
  return partial_project(psi.branch(k), assignments).squared_norm() / std::norm(psi.envelope()[k]);
}

/// Probability of a subset of readings, as the norm of the partially
/// projected branch (completeness of each unassigned memory basis).
inline double marginal_prob(const HistoryState& psi, const Assignments& subset, double t, double eps_cond = 1e-8) {
  return joint_prob(psi, subset, t, eps_cond);
}

/// Same marginal, by explicit summation of joint_prob over every basis label
/// (outcomes and the ready slot) of the unassigned memories.
inline double marginal_by_summation(const HistoryState& psi, const Assignments& subset, double t,
                                    double eps_cond = 1e-8) {
  detail::check_memory_assignments(psi, subset);
  std::vector<SpaceLabel> free;
  for (const auto& f : psi.system_factors()) {
    if (f.name != "Q" && !subset.contains(f.name)) free.push_back(f);
  }
  double sum = 0.0;
  std::vector<std::size_t> digit(free.size(), 0);
  while (true) {
    Assignments full = subset;
    for (std::size_t i = 0; i < free.size(); ++i) full[free[i].name] = digit[i];
    sum += joint_prob(psi, full, t, eps_cond);
    std::size_t i = free.size();
    while (i-- > 0) {
      if (++digit[i] < free[i].dim) break;
      digit[i] = 0;
    }
    if (i == static_cast<std::size_t>(-1)) break;
  }
  return sum;
}

/// A memory reading at a clock time.
struct Reading {
  std::string memory;
  std::size_t outcome = 0;
  double t = 0.0;
};

/// P[(later) | (earlier)] = P(later, earlier | t'') / P(earlier | t').
inline double conditional_prob(const HistoryState& psi, const Reading& later, const Reading& earlier,
                               double eps_cond = 1e-8) {
  if (later.memory == earlier.memory) throw ValidationError("conditional readings must use different memories");
  if (earlier.t > later.t) throw ValidationError("conditioning reading must not be later than the conditioned one");
  const double denom = marginal_prob(psi, {{earlier.memory, earlier.outcome}}, earlier.t, eps_cond);
  if (denom < eps_cond * eps_cond) throw NumericalGuardError("conditioning on null-probability outcome");
  const double num =
      joint_prob(psi, {{later.memory, later.outcome}, {earlier.memory, earlier.outcome}}, later.t, eps_cond);
  return num / denom;
}

/// P[(a_1|t_1'), ..., (a_N|t_N')] = P(a_1..a_N | t_N'): multi-time
/// statistics reduce to one conditioning time.
inline double multi_time_joint(const HistoryState& psi, const std::vector<Reading>& readings, double eps_cond = 1e-8) {
  if (readings.empty()) throw ValidationError("no readings given");
  Assignments all;
  for (std::size_t i = 0; i < readings.size(); ++i) {
    const auto& r = readings[i];
    if (i > 0 && !(r.t > readings[i - 1].t)) throw ValidationError("reading times must be strictly increasing");
    const auto it = psi.event_times().find(r.memory);
    if (it == psi.event_times().end()) throw ValidationError("no measurement writes to memory '" + r.memory + "'");
    if (!event_has_occurred(r.t, it->second)) {
      throw ValidationError("reading of " + r.memory + " requested before its measurement");
    }
    if (!all.emplace(r.memory, r.outcome).second) throw ValidationError("memory " + r.memory + " read twice");
  }
  return joint_prob(psi, all, readings.back().t, eps_cond);
}

/// Mixes the first two basis states of `memory` in the conditional state at
/// grid index k. A fault-injection hook for verification tests.
inline HistoryState corrupt_branch(const HistoryState& psi, std::size_t k, const std::string& memory) {
  const auto& f = psi.system_factors();
  const auto pos = factor_position(f, memory);
  if (f[pos].dim < 2) throw ValidationError("memory too small to corrupt");
  Matrix h = Matrix::Identity(static_cast<Eigen::Index>(f[pos].dim), static_cast<Eigen::Index>(f[pos].dim));
  const double s = std::numbers::sqrt2 / 2.0;
  h(0, 0) = s;
  h(0, 1) = s;
  h(1, 0) = s;
  h(1, 1) = -s;
  const auto full = embed(Operator({f[pos]}, h), f);
  return psi.with_state(k, full.matrix() * psi.state(k));
}

/// Maximum deviation of each two-measurement identity, over every grid time,
/// every ordered pair of events and every pair of readings.
struct TwoMeasurementReport {
  double joint = 0.0;         // P(b,a|t) against the Kraus-chain oracle
  double marginal_a = 0.0;    // P(a|t) = sum_b P(b,a|t) = direct norm
  double marginal_b = 0.0;    // P(b|t) = sum_a P(b,a|t) = direct norm
  double two_time = 0.0;      // P[(b|t''),(a|t')] = P(b,a|t'') via oracle conditional
  double conditional = 0.0;   // P[(b|t'')|(a|t')] against the oracle
  std::size_t comparisons = 0;

  double max() const { return std::max({joint, marginal_a, marginal_b, two_time, conditional}); }
};

inline TwoMeasurementReport check_two_measurement_identities(const HistoryState& psi, const MeasurementSchedule& schedule,
                                                  const StateVector& psi0,
                                                  std::size_t substeps_per_unit_time = kDefaultSubsteps,
                                                  double eps_cond = 1e-8) {
  const auto& events = schedule.events();
  if (events.size() < 2) throw ValidationError("two-measurement identities need at least two measurement events");
  const auto& grid = psi.grid();
  const std::size_t n = grid.size();
  std::vector<std::size_t> usable;
  for (std::size_t k = 0; k < n; ++k) {
    if (std::abs(psi.envelope()[k]) >= eps_cond) usable.push_back(k);
  }

  TwoMeasurementReport rep;
  auto bump = [&rep](double& slot, double dev) {
    slot = std::max(slot, std::abs(dev));
    ++rep.comparisons;
  };
  for (std::size_t ia = 0; ia < events.size(); ++ia) {
    for (std::size_t ib = ia + 1; ib < events.size(); ++ib) {
      const auto& ma = events[ia].memory;
      const auto& mb = events[ib].memory;
      const std::size_t da = ma.dim(), db = mb.dim();
      // Per-time tables: hist/oracle joint [a][b], hist/oracle marginals.
      std::vector<std::vector<double>> hj(n, std::vector<double>(da * db)), oj = hj;
      std::vector<std::vector<double>> ha(n, std::vector<double>(da)), oa = ha;
      for (std::size_t k : usable) {
        const double t = grid.time(k);
        for (std::size_t a = 0; a < da; ++a) {
          ha[k][a] = marginal_prob(psi, {{ma.label(), a}}, t, eps_cond);
          oa[k][a] = oracle_chain_prob(schedule, psi0, {{ma.label(), a}}, t, psi.t0(), substeps_per_unit_time);
          for (std::size_t b = 0; b < db; ++b) {
            const Assignments ab{{ma.label(), a}, {mb.label(), b}};
            hj[k][a * db + b] = joint_prob(psi, ab, t, eps_cond);
            oj[k][a * db + b] = oracle_chain_prob(schedule, psi0, ab, t, psi.t0(), substeps_per_unit_time);
            bump(rep.joint, hj[k][a * db + b] - oj[k][a * db + b]);
          }
        }
        for (std::size_t a = 0; a < da; ++a) {
          double s = 0.0;
          for (std::size_t b = 0; b < db; ++b) s += hj[k][a * db + b];
          bump(rep.marginal_a, s - ha[k][a]);
        }
        for (std::size_t b = 0; b < db; ++b) {
          double s = 0.0;
          for (std::size_t a = 0; a < da; ++a) s += hj[k][a * db + b];
          bump(rep.marginal_b, s - marginal_prob(psi, {{mb.label(), b}}, t, eps_cond));
        }
      }
      const double guard = eps_cond * eps_cond;
      for (std::size_t i1 = 0; i1 < usable.size(); ++i1) {
        const std::size_t k1 = usable[i1];
        for (std::size_t a = 0; a < ma.outcomes(); ++a) {
          if (ha[k1][a] < guard || oa[k1][a] < guard) continue;
          for (std::size_t i2 = i1; i2 < usable.size(); ++i2) {
            const std::size_t k2 = usable[i2];
            for (std::size_t b = 0; b < mb.outcomes(); ++b) {
              const double oracle_cond = oj[k2][a * db + b] / oa[k1][a];
              bump(rep.two_time, oracle_cond * ha[k1][a] - hj[k2][a * db + b]);
              bump(rep.conditional, hj[k2][a * db + b] / ha[k1][a] - oracle_cond);
            }
          }
        }
      }
    }
  }
  return rep;
}

}  // namespace histsim
