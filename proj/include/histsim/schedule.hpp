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

// Measurement instruments, memory registers and event schedules.

#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "histsim/hamiltonian.hpp"

namespace histsim {

/// Outcome-labelled Kraus family on Q with sum_a K_a^dagger K_a = I.
class KrausInstrument {
 public:
  KrausInstrument() = default;

  explicit KrausInstrument(std::vector<Operator> kraus) : kraus_(std::move(kraus)) {
    certificate_ = check_kraus_complete(kraus_);
    const auto& f = kraus_.front().factors();
    if (f.size() != 1 || f.front().name != "Q") throw ValidationError("Kraus operators must act on Q alone");
    if (!certificate_.complete) {
      throw ValidationError("Kraus family is not complete (violation " + std::to_string(certificate_.violation) +
                            ")");
    }
  }

  std::size_t outcomes() const { return kraus_.size(); }
  std::size_t system_dim() const { return kraus_.front().dim(); }
  const Operator& kraus(std::size_t a) const { return kraus_.at(a); }
  const std::vector<Operator>& kraus() const { return kraus_; }
  const KrausCertificate& certificate() const { return certificate_; }

 private:
  std::vector<Operator> kraus_;
  KrausCertificate certificate_;
};

/// Rank-1 projective instrument from an orthonormal basis of Q.
inline KrausInstrument instrument_from_projectors(const std::vector<Vector>& basis) {
  if (basis.empty()) throw ValidationError("empty measurement basis");
  const auto d = basis.front().size();
  if (static_cast<std::size_t>(d) != basis.size()) {
    throw ValidationError("projective basis must have as many vectors as the space dimension");
  }
  for (std::size_t i = 0; i < basis.size(); ++i) {
    if (basis[i].size() != d) throw ValidationError("basis vectors of different lengths");
    for (std::size_t j = 0; j <= i; ++j) {
      const cplx ov = basis[j].dot(basis[i]);
      const double want = i == j ? 1.0 : 0.0;
      if (std::abs(ov - want) > 1e-10) throw ValidationError("measurement basis is not orthonormal");
    }
  }
  std::vector<Operator> ks;
  ks.reserve(basis.size());
  for (const auto& b : basis) ks.emplace_back(Factors{{"Q", static_cast<std::size_t>(d)}}, b * b.adjoint());
  return KrausInstrument(std::move(ks));
}

/// Memory register: outcome states |a> = basis 0..m-1 plus a ready slot at
/// basis m. The ready state defaults to that slot and may be overridden.
class MemorySpec {
 public:
  MemorySpec() = default;

  MemorySpec(std::string label, std::size_t outcomes, std::optional<Vector> ready = std::nullopt)
      : label_(std::move(label)), outcomes_(outcomes) {
    if (label_.size() < 2 || label_[0] != 'M') throw ValidationError("memory labels must be M1..MN");
    (void)detail::label_rank(label_);
    if (outcomes_ < 1) throw ValidationError("memory needs at least one outcome");
    const auto d = static_cast<Eigen::Index>(outcomes_ + 1);
    if (ready) {
      if (ready->size() != d) throw ValidationError("ready state has wrong dimension for memory " + label_);
      const double n = ready->norm();
      if (std::abs(n - 1.0) > 1e-10) throw ValidationError("ready state of memory " + label_ + " is not unit norm");
      ready_ = *ready;
    } else {
      ready_ = Vector::Zero(d);
      ready_(d - 1) = 1.0;
    }
  }

  const std::string& label() const { return label_; }
  std::size_t outcomes() const { return outcomes_; }
  std::size_t dim() const { return outcomes_ + 1; }
  std::size_t ready_index() const { return outcomes_; }
  const Vector& ready() const { return ready_; }
  SpaceLabel space() const { return {label_, dim()}; }

 private:
  std::string label_;
  std::size_t outcomes_ = 0;
  Vector ready_;
};

struct MeasurementEvent {
  double time = 0.0;
  KrausInstrument instrument;
  MemorySpec memory;
};

/// Free Hamiltonian on Q plus impulsive measurements at strictly increasing
/// times, each writing into its own memory register.
class MeasurementSchedule {
 public:
  MeasurementSchedule() = default;

  MeasurementSchedule(HamiltonianSpec base, std::vector<MeasurementEvent> events)
      : base_(std::move(base)), events_(std::move(events)) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < events_.size(); ++i) {
      const auto& e = events_[i];
      if (i > 0 && !(e.time > events_[i - 1].time)) {
        throw ValidationError("measurement times must be strictly increasing");
      }
      if (!seen.insert(e.memory.label()).second) {
        throw ValidationError("memory label " + e.memory.label() + " used twice");
      }
      if (e.instrument.system_dim() != base_.dim()) {
        throw ValidationError("instrument dimension does not match the system");
      }
      if (e.memory.outcomes() != e.instrument.outcomes()) {
        throw ValidationError("memory " + e.memory.label() + " outcome count does not match its instrument");
      }
    }
  }

  const HamiltonianSpec& base() const { return base_; }
  const std::vector<MeasurementEvent>& events() const { return events_; }

  const MeasurementEvent& event_for(const std::string& memory) const {
    for (const auto& e : events_) {
      if (e.memory.label() == memory) return e;
    }
    throw ValidationError("no measurement writes to memory '" + memory + "'");
  }

  /// Q followed by the memories in canonical order.
  Factors system_factors() const {
    Factors f{base_.label()};
    for (const auto& e : events_) f.push_back(e.memory.space());
    std::stable_sort(f.begin() + 1, f.end(), [](const SpaceLabel& a, const SpaceLabel& b) {
      return detail::label_rank(a.name) < detail::label_rank(b.name);
    });
    return f;
  }

 private:
  HamiltonianSpec base_;
  std::vector<MeasurementEvent> events_;
};

}  // namespace histsim
