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

// Finite periodic lattice standing in for the clock space.
//
// Basis states are orthonormal, <t_k|t_l> = delta_kl. Continuum formulas map
// through |t> <-> |t_k>/sqrt(dt) and integral dt <-> sum_k dt. Frequencies use
// the signed lattice omega_j = 2 pi j / (N dt), j = -N/2 .. N/2-1, and the
// frequency states have components exp(i omega_j t_k)/sqrt(N).

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "histsim/tensor.hpp"

namespace histsim {


class ClockGrid {
 public:
  ClockGrid() = default;

  ClockGrid(std::size_t n, double t_min, double t_max) : n_(n), t_min_(t_min), t_max_(t_max) {
    if (n < 8 || !std::has_single_bit(n)) {
      throw ValidationError("clock grid size must be a power of two >= 8, got " + std::to_string(n));
    }
    if (!(t_max > t_min) || !std::isfinite(t_min) || !std::isfinite(t_max)) {
      throw ValidationError("clock window must satisfy t_max > t_min");
    }
  }

  std::size_t size() const { return n_; }
  double t_min() const { return t_min_; }
  double t_max() const { return t_max_; }
  double dt() const { return (t_max_ - t_min_) / static_cast<double>(n_); }
  double time(std::size_t k) const { return t_min_ + static_cast<double>(k) * dt(); }

  std::vector<double> times() const {
    std::vector<double> out(n_);
    for (std::size_t k = 0; k < n_; ++k) out[k] = time(k);
    return out;
  }

  long min_frequency_index() const { return -static_cast<long>(n_ / 2); }
  long max_frequency_index() const { return static_cast<long>(n_ / 2) - 1; }

  double frequency(long j) const {
    check_frequency_index(j);
    return 2.0 * std::numbers::pi * static_cast<double>(j) / (t_max_ - t_min_);
  }

  /// Frequency of FFT bin b (0..N-1) under the signed convention.
  double bin_frequency(std::size_t b) const {
    const long j = b < n_ / 2 ? static_cast<long>(b) : static_cast<long>(b) - static_cast<long>(n_);
    return frequency(j);
  }

  void check_frequency_index(long j) const {
    if (j < min_frequency_index() || j > max_frequency_index()) {
      throw ValidationError("frequency index " + std::to_string(j) + " outside lattice");
    }
  }

  /// Nearest grid index; throws when t lies outside [t_min, t_max).
  std::size_t snap(double t) const {
    const double eps = 1e-12 * (1.0 + std::max(std::abs(t_min_), std::abs(t_max_)));
    if (!(t >= t_min_ - eps && t < t_max_)) {
      throw ValidationError("time " + std::to_string(t) + " outside clock window");
    }
    const double x = std::round((t - t_min_) / dt());
    return static_cast<std::size_t>(std::clamp(x, 0.0, static_cast<double>(n_ - 1)));
  }

  bool contains(double t) const { return t >= t_min_ && t < t_max_; }

  SpaceLabel label() const { return {"T", n_}; }

  friend bool operator==(const ClockGrid&, const ClockGrid&) = default;

 private:
  std::size_t n_ = 0;
  double t_min_ = 0.0;
  double t_max_ = 1.0;
};

inline ClockGrid make_grid(std::size_t n, double t_min, double t_max) { return ClockGrid(n, t_min, t_max); }

/// Applies the frequency operator to a length-N sequence sampled on the grid.
inline std::vector<cplx> apply_omega(const ClockGrid& grid, std::vector<cplx> v) {
  if (v.size() != grid.size()) throw ValidationError("sequence length does not match clock grid");
  Eigen::FFT<double> fft;
  std::vector<cplx> spectrum;
  fft.fwd(spectrum, v);
  for (std::size_t b = 0; b < spectrum.size(); ++b) spectrum[b] *= grid.bin_frequency(b);
  fft.inv(v, spectrum);  // includes the 1/N
  return v;
}

/// d/dt = i Omega, evaluated spectrally.
inline std::vector<cplx> spectral_derivative(const ClockGrid& grid, std::vector<cplx> v) {
  v = apply_omega(grid, std::move(v));
  for (auto& x : v) x *= cplx(0.0, 1.0);
  return v;
}

inline Operator time_operator(const ClockGrid& grid) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) m(k, k) = grid.time(static_cast<std::size_t>(k));
  return Operator({grid.label()}, std::move(m));
}

/// F^dagger diag(omega_j) F, symmetrized to remove transform round-off.
inline Operator omega_operator(const ClockGrid& grid) {
  const std::size_t n = grid.size();
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<cplx> e(n, 0.0);
    e[c] = 1.0;
    const auto col = apply_omega(grid, std::move(e));
    for (std::size_t r = 0; r < n; ++r) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = col[r];
  }
  Matrix herm = 0.5 * (m + m.adjoint());
  return Operator({grid.label()}, std::move(herm));
}

/// |omega_j>, the column of F^dagger with components exp(i omega_j t_k)/sqrt(N).
inline StateVector frequency_vector(const ClockGrid& grid, long j) {
  const double w = grid.frequency(j);
  const auto n = static_cast<Eigen::Index>(grid.size());
  Vector v(n);
  const double s = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    // Reduce the phase on the lattice to keep large windows accurate.
    const double phase = w * grid.t_min() +
                         2.0 * std::numbers::pi * static_cast<double>((j * k) % static_cast<long>(n)) /
                             static_cast<double>(n);
    v(k) = std::polar(s, phase);
  }
  return StateVector({grid.label()}, std::move(v));
}

/// Amplitude that the clock reads t_k; normalized so sum_k |phi_k|^2 = 1.
class Envelope {
 public:
  enum class Kind { kFlat, kGaussian, kCustom };

  Envelope() = default;

  Envelope(ClockGrid grid, std::vector<cplx> weights, Kind kind = Kind::kCustom, double width = 0.0)
      : grid_(grid), weights_(std::move(weights)), kind_(kind), width_(width) {
    if (weights_.size() != grid_.size()) throw ValidationError("envelope length does not match clock grid");
    double norm2 = 0.0;
    for (const auto& w : weights_) norm2 += std::norm(w);
    if (!(norm2 > 0.0) || !std::isfinite(norm2)) throw ValidationError("envelope is identically zero");
    const double s = 1.0 / std::sqrt(norm2);
    for (auto& w : weights_) w *= s;
  }

  const ClockGrid& grid() const { return grid_; }
  const std::vector<cplx>& weights() const { return weights_; }
  cplx operator[](std::size_t k) const { return weights_.at(k); }
  Kind kind() const { return kind_; }
  /// Gaussian parameter n of exp(-t^2/n); 0 for other kinds.
  double width() const { return width_; }
  const std::optional<std::string>& warning() const { return warning_; }

  bool is_flat(double tol = 1e-12) const {
    const double ref = std::abs(weights_.front());
    for (const auto& w : weights_) {
      if (std::abs(w - weights_.front()) > tol * std::max(ref, 1.0)) return false;
    }
    return true;
  }

  StateVector as_state() const {
    Vector v(static_cast<Eigen::Index>(weights_.size()));
    for (std::size_t k = 0; k < weights_.size(); ++k) v(static_cast<Eigen::Index>(k)) = weights_[k];
    return StateVector({grid_.label()}, std::move(v));
  }

 private:
  friend Envelope gaussian_envelope(const ClockGrid&, double);

  ClockGrid grid_;
  std::vector<cplx> weights_;
  Kind kind_ = Kind::kCustom;
  double width_ = 0.0;
  std::optional<std::string> warning_;
};

inline Envelope flat_envelope(const ClockGrid& grid) {
  return Envelope(grid, std::vector<cplx>(grid.size(), 1.0), Envelope::Kind::kFlat);
}

/// phi_k proportional to exp(-t_k^2 / n). A warning is attached when the
/// window does not cover +-3 standard deviations of |phi| around t = 0.
inline Envelope gaussian_envelope(const ClockGrid& grid, double n) {
  if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("gaussian envelope width must be positive");
  std::vector<cplx> w(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid.time(k);
    w[k] = std::exp(-t * t / n);
  }
  double norm2 = 0.0;
  for (const auto& x : w) norm2 += std::norm(x);
  if (!(norm2 > 0.0)) throw ValidationError("gaussian envelope vanishes on the whole window");
  Envelope env(grid, std::move(w), Envelope::Kind::kGaussian, n);
  const double sigma = std::sqrt(n / 2.0);
  if (grid.t_min() > -3.0 * sigma || grid.t_max() < 3.0 * sigma) {
    env.warning_ = "clock window [" + std::to_string(grid.t_min()) + ", " + std::to_string(grid.t_max()) +
                   ") truncates the gaussian envelope (n = " + std::to_string(n) + ")";
  }
  return env;
}

/// max over the test vector of |([T, Omega] - i) g| / |g|. Exact canonical
/// commutation is impossible on a finite grid; this measures the defect.
inline double commutator_defect(const ClockGrid& grid, const std::vector<cplx>& g) {
  if (g.size() != grid.size()) throw ValidationError("test vector length does not match clock grid");
  std::vector<cplx> tg(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) tg[k] = grid.time(k) * g[k];
  const auto omega_g = apply_omega(grid, g);
  const auto omega_tg = apply_omega(grid, tg);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const cplx r = grid.time(k) * omega_g[k] - omega_tg[k] - cplx(0.0, 1.0) * g[k];
    num += std::norm(r);
    den += std::norm(g[k]);
  }
  return std::sqrt(num / den);
}

/// Gaussian exp(-(t - c)^2 / n) centred in the window, the standard probe for
/// commutator_defect.
inline std::vector<cplx> centered_gaussian(const ClockGrid& grid, double n) {
  const double c = 0.5 * (grid.t_min() + grid.t_max());
  std::vector<cplx> g(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double x = grid.time(k) - c;
    g[k] = std::exp(-x * x / n);
  }
  return g;
}

}  // namespace histsim
