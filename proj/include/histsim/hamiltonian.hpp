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

#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <type_traits>
#include <variant>
#include <vector>

#include "histsim/tensor.hpp"

namespace histsim {

/// Scalar envelope multiplying one Hamiltonian term.
struct Waveform {
  struct Constant {
    double value = 1.0;
  };
  // f(t) = values[i] for starts[i] <= t < starts[i+1]; 0 before starts[0].
  struct Piecewise {
    std::vector<double> starts;
    std::vector<double> values;
  };
  // f(t) = amplitude * sin(frequency * t + phase), frequency in rad per unit time.
  struct Sinusoid {
    double amplitude = 1.0;
    double frequency = 1.0;
    double phase = 0.0;
  };

  std::variant<Constant, Piecewise, Sinusoid> shape = Constant{};

  static Waveform constant(double v = 1.0) { return {Constant{v}}; }
  static Waveform piecewise(std::vector<double> starts, std::vector<double> values) {
    Waveform w{Piecewise{std::move(starts), std::move(values)}};
    w.validate();
    return w;
  }
  static Waveform sinusoid(double amplitude, double frequency, double phase) {
    return {Sinusoid{amplitude, frequency, phase}};
  }

  bool is_constant() const { return std::holds_alternative<Constant>(shape); }

  void validate() const {
    if (const auto* p = std::get_if<Piecewise>(&shape)) {
      if (p->starts.empty() || p->starts.size() != p->values.size()) {
        throw ValidationError("piecewise waveform needs matching, non-empty breakpoint and value lists");
      }
      for (std::size_t i = 1; i < p->starts.size(); ++i) {
        if (!(p->starts[i] > p->starts[i - 1])) {
          throw ValidationError("piecewise waveform breakpoints must be strictly increasing");
        }
      }
    }
  }

  double operator()(double t) const {
    return std::visit(
        [t](const auto& s) -> double {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Constant>) {
            return s.value;
          } else if constexpr (std::is_same_v<S, Piecewise>) {
            double v = 0.0;
            for (std::size_t i = 0; i < s.starts.size() && s.starts[i] <= t; ++i) v = s.values[i];
            return v;
          } else {
            return s.amplitude * std::sin(s.frequency * t + s.phase);
          }
        },
        shape);
  }
};

struct HamiltonianTerm {
  Operator op;  // hermitian, on Q
  Waveform wave;
};

/// H(t) = sum_i wave_i(t) op_i on the system space Q.
class HamiltonianSpec {
 public:
  HamiltonianSpec() = default;

  explicit HamiltonianSpec(std::vector<HamiltonianTerm> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw ValidationError("hamiltonian needs at least one term");
    const auto& f = terms_.front().op.factors();
    if (f.size() != 1 || f.front().name != "Q") throw ValidationError("hamiltonian terms must act on Q alone");
    for (const auto& term : terms_) {
      if (term.op.factors() != f) throw ValidationError("hamiltonian terms act on different spaces");
      if (!term.op.is_hermitian()) throw ValidationError("hamiltonian term is not hermitian");
      term.wave.validate();
    }
  }

  static HamiltonianSpec constant(const Operator& h) { return HamiltonianSpec({{h, Waveform::constant()}}); }

  static HamiltonianSpec zero(std::size_t dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    return constant(Operator({{"Q", dim}}, Matrix::Zero(d, d)));
  }

  const std::vector<HamiltonianTerm>& terms() const { return terms_; }
  std::size_t dim() const { return terms_.front().op.dim(); }
  SpaceLabel label() const { return terms_.front().op.factors().front(); }

  bool is_constant() const {
    for (const auto& t : terms_) {
      if (!t.wave.is_constant()) return false;
    }
    return true;
  }

  Matrix matrix_at(double t) const {
    Matrix h = Matrix::Zero(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim()));
    for (const auto& term : terms_) h += term.wave(t) * term.op.matrix();
    return h;
  }

  Operator at(double t) const { return Operator({label()}, matrix_at(t)); }

  /// Same dynamics with every eigenvalue moved by `shift` (H -> H + shift I).
  HamiltonianSpec shifted(double shift) const {
    auto terms = terms_;
    const auto d = static_cast<Eigen::Index>(dim());
    terms.push_back({Operator({label()}, shift * Matrix::Identity(d, d)), Waveform::constant()});
    return HamiltonianSpec(std::move(terms));
  }

 private:
  std::vector<HamiltonianTerm> terms_;
};

}  // namespace histsim
