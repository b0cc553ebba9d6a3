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

// Dense complex linear algebra over labeled tensor-product spaces.
//
// Every vector and operator carries an ordered list of factor labels. The
// canonical order is the clock "T" first, then the system "Q", then memory
// registers "M1", "M2", ... by index. Index arithmetic follows the standard
// Kronecker convention: the leftmost factor is the slowest-varying index.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace histsim {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kUnitaryTol = 1e-10;
inline constexpr double kKrausTol = 1e-10;

/// Input rejected before any computation (bad shape, label, range, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical guard tripped, e.g. conditioning on a null-probability event.
class NumericalGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SpaceLabel {
  std::string name;
  std::size_t dim = 1;

  friend bool operator==(const SpaceLabel&, const SpaceLabel&) = default;
};

using Factors = std::vector<SpaceLabel>;

namespace detail {

// Sort key for the canonical factor order T < Q < M1 < M2 < ...
inline std::size_t label_rank(const std::string& name) {
  if (name == "T") return 0;
  if (name == "Q") return 1;
  if (name.size() >= 2 && name[0] == 'M' &&
      std::all_of(name.begin() + 1, name.end(), [](char c) { return c >= '0' && c <= '9'; }) &&
      name[1] != '0') {
    return 1 + std::stoul(name.substr(1));
  }
  throw ValidationError("space label '" + name + "' is not one of T, Q, M1..MN");
}

inline void validate_factors(const Factors& factors) {
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (factors[i].dim < 1) throw ValidationError("space '" + factors[i].name + "' has dimension 0");
    (void)label_rank(factors[i].name);
    for (std::size_t j = 0; j < i; ++j) {
      if (factors[i].name == factors[j].name) {
        throw ValidationError("duplicate space label '" + factors[i].name + "'");
      }
    }
  }
}

inline std::size_t total_dim(const Factors& factors) {
  std::size_t d = 1;
  for (const auto& f : factors) d *= f.dim;
  return d;
}

inline bool is_canonical(const Factors& factors) {
  for (std::size_t i = 1; i < factors.size(); ++i) {
    if (label_rank(factors[i - 1].name) > label_rank(factors[i].name)) return false;
  }
  return true;
}

// For the permutation that reorders `from` into canonical order, returns the
// canonical factor list and, for every canonical linear index, the linear
// index of the same basis element in the original layout.
inline std::pair<Factors, std::vector<std::size_t>> canonical_permutation(const Factors& from) {
  const std::size_t n = from.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return label_rank(from[a].name) < label_rank(from[b].name);
  });
  Factors to(n);
  for (std::size_t i = 0; i < n; ++i) to[i] = from[order[i]];

  std::vector<std::size_t> old_stride(n);
  std::size_t s = 1;
  for (std::size_t i = n; i-- > 0;) {
    old_stride[i] = s;
    s *= from[i].dim;
  }
  const std::size_t total = s;
  std::vector<std::size_t> map(total);
  std::vector<std::size_t> digit(n, 0);
  for (std::size_t lin = 0; lin < total; ++lin) {
    std::size_t old = 0;
    for (std::size_t i = 0; i < n; ++i) old += digit[i] * old_stride[order[i]];
    map[lin] = old;
    for (std::size_t i = n; i-- > 0;) {
      if (++digit[i] < to[i].dim) break;
      digit[i] = 0;
    }
  }
  return {std::move(to), std::move(map)};
}

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace detail

class StateVector {
 public:
  StateVector() = default;

  StateVector(Factors factors, Vector amplitudes)
      : factors_(std::move(factors)), amps_(std::move(amplitudes)) {
    detail::validate_factors(factors_);
    if (static_cast<std::size_t>(amps_.size()) != detail::total_dim(factors_)) {
      throw ValidationError("amplitude count " + std::to_string(amps_.size()) +
                            " does not match product of factor dimensions " +
                            std::to_string(detail::total_dim(factors_)));
    }
    if (!amps_.allFinite()) throw ValidationError("state vector has non-finite amplitudes");
    if (!detail::is_canonical(factors_)) {
      auto [to, map] = detail::canonical_permutation(factors_);
      Vector out(amps_.size());
      for (std::size_t i = 0; i < map.size(); ++i) out(static_cast<Eigen::Index>(i)) = amps_(static_cast<Eigen::Index>(map[i]));
      factors_ = std::move(to);
      amps_ = std::move(out);
    }
  }

  static StateVector basis(const SpaceLabel& label, std::size_t k) {
    if (k >= label.dim) throw ValidationError("basis index out of range for space '" + label.name + "'");
    Vector v = Vector::Zero(static_cast<Eigen::Index>(label.dim));
    v(static_cast<Eigen::Index>(k)) = 1.0;
    return StateVector({label}, std::move(v));
  }

  const Factors& factors() const { return factors_; }
  const Vector& amplitudes() const { return amps_; }
  std::size_t dim() const { return static_cast<std::size_t>(amps_.size()); }
  double norm() const { return amps_.norm(); }
  double squared_norm() const { return amps_.squaredNorm(); }

  StateVector normalized() const {
    const double n = norm();
    if (n == 0.0) throw NumericalGuardError("cannot normalize the zero vector");
    return StateVector(factors_, amps_ / n);
  }

 private:
  Factors factors_;
  Vector amps_;
};

class Operator {
 public:
  Operator() = default;

  Operator(Factors factors, Matrix matrix) : factors_(std::move(factors)), matrix_(std::move(matrix)) {
    detail::validate_factors(factors_);
    if (matrix_.rows() != matrix_.cols()) throw ValidationError("operator matrix is not square");
    if (static_cast<std::size_t>(matrix_.rows()) != detail::total_dim(factors_)) {
      throw ValidationError("operator size does not match product of factor dimensions");
    }
    if (!matrix_.allFinite()) throw ValidationError("operator has non-finite entries");
    if (!detail::is_canonical(factors_)) {
      auto [to, map] = detail::canonical_permutation(factors_);
      const auto d = static_cast<Eigen::Index>(map.size());
      Matrix out(d, d);
      for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
          out(i, j) = matrix_(static_cast<Eigen::Index>(map[i]), static_cast<Eigen::Index>(map[j]));
        }
      }
      factors_ = std::move(to);
      matrix_ = std::move(out);
    }
    hermitian_ = detail::max_abs(matrix_ - matrix_.adjoint()) <= kHermitianTol;
  }

  static Operator identity(const Factors& factors) {
    const auto d = static_cast<Eigen::Index>(detail::total_dim(factors));
    Operator op(factors, Matrix::Identity(d, d));
    op.unitary_ = true;
    return op;
  }

  /// Wraps `matrix` after checking max|A^dagger A - I| <= kUnitaryTol.
  static Operator unitary(Factors factors, Matrix matrix);

  const Factors& factors() const { return factors_; }
  const Matrix& matrix() const { return matrix_; }
  std::size_t dim() const { return static_cast<std::size_t>(matrix_.rows()); }
  bool is_hermitian() const { return hermitian_; }
  // Only set when a constructor has certified it; see unitarity_defect().
  bool is_unitary() const { return unitary_; }

  Operator adjoint() const {
    Operator out(factors_, matrix_.adjoint());
    out.unitary_ = unitary_;
    return out;
  }

 private:
  Factors factors_;
  Matrix matrix_;
  bool hermitian_ = false;
  bool unitary_ = false;
};

inline double hermiticity_defect(const Matrix& m) { return detail::max_abs(m - m.adjoint()); }

inline double unitarity_defect(const Matrix& m) {
  return detail::max_abs(m.adjoint() * m - Matrix::Identity(m.rows(), m.cols()));
}

inline Operator Operator::unitary(Factors factors, Matrix matrix) {
  Operator op(std::move(factors), std::move(matrix));
  const double defect = unitarity_defect(op.matrix_);
  if (defect > kUnitaryTol) {
    throw ValidationError("operator is not unitary (defect " + std::to_string(defect) + ")");
  }
  op.unitary_ = true;
  return op;
}

namespace detail {

inline Factors concat_factors(const Factors& a, const Factors& b) {
  Factors out = a;
  out.insert(out.end(), b.begin(), b.end());
  validate_factors(out);
  return out;
}

inline Matrix kron_matrix(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline Vector kron_vector(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

}  // namespace detail

/// Tensor product. Labels must be disjoint; the result is reordered into the
/// canonical factor order when the concatenation is not already canonical.
inline Operator kron(const Operator& a, const Operator& b) {
  Operator out(detail::concat_factors(a.factors(), b.factors()), detail::kron_matrix(a.matrix(), b.matrix()));
  if (a.is_unitary() && b.is_unitary()) return Operator::unitary(out.factors(), out.matrix());
  return out;
}

inline StateVector kron(const StateVector& a, const StateVector& b) {
  return StateVector(detail::concat_factors(a.factors(), b.factors()),
                     detail::kron_vector(a.amplitudes(), b.amplitudes()));
}

inline StateVector apply(const Operator& a, const StateVector& v) {
  if (a.factors() != v.factors()) throw ValidationError("operator and state live on different spaces");
  return StateVector(v.factors(), a.matrix() * v.amplitudes());
}

inline Operator compose(const Operator& a, const Operator& b) {
  if (a.factors() != b.factors()) throw ValidationError("cannot compose operators on different spaces");
  return Operator(a.factors(), a.matrix() * b.matrix());
}

inline cplx inner(const StateVector& a, const StateVector& b) {
  if (a.factors() != b.factors()) throw ValidationError("inner product of states on different spaces");
  return a.amplitudes().dot(b.amplitudes());
}

inline std::size_t factor_position(const Factors& factors, const std::string& name) {
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (factors[i].name == name) return i;
  }
  throw ValidationError("space label '" + name + "' not present");
}

/// Unnormalized slice <k|_label v on the remaining factors. Its squared norm
/// is the probability weight of branch k.
inline StateVector partial_project(const StateVector& v, const std::string& label, std::size_t k) {
  const auto& f = v.factors();
  const std::size_t pos = factor_position(f, label);
  if (k >= f[pos].dim) {
    throw ValidationError("basis index " + std::to_string(k) + " out of range for space '" + label + "'");
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < pos; ++i) outer *= f[i].dim;
  std::size_t inner_dim = 1;
  for (std::size_t i = pos + 1; i < f.size(); ++i) inner_dim *= f[i].dim;
  const std::size_t d = f[pos].dim;

  Factors rest;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i != pos) rest.push_back(f[i]);
  }
  Vector out(static_cast<Eigen::Index>(outer * inner_dim));
  for (std::size_t o = 0; o < outer; ++o) {
    out.segment(static_cast<Eigen::Index>(o * inner_dim), static_cast<Eigen::Index>(inner_dim)) =
        v.amplitudes().segment(static_cast<Eigen::Index>((o * d + k) * inner_dim), static_cast<Eigen::Index>(inner_dim));
  }
  return StateVector(std::move(rest), std::move(out));
}

/// Projects on several factors at once: label -> basis index.
inline StateVector partial_project(StateVector v, const std::map<std::string, std::size_t>& assignments) {
  for (const auto& [label, k] : assignments) v = partial_project(v, label, k);
  return v;
}

/// exp(-i H theta) for hermitian H, through the eigendecomposition.
inline Operator matrix_exp(const Operator& h, double theta) {
  if (!h.is_hermitian()) {
    throw ValidationError("matrix_exp requires a hermitian generator (defect " +
                          std::to_string(hermiticity_defect(h.matrix())) + ")");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h.matrix());
  const Vector phases = (eig.eigenvalues().cast<cplx>() * cplx(0.0, -theta)).array().exp().matrix();
  Matrix u = eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
  return Operator::unitary(h.factors(), std::move(u));
}

struct KrausCertificate {
  bool complete = false;
  double violation = 0.0;  // max |sum_a K_a^dagger K_a - I|
};

inline KrausCertificate check_kraus_complete(const std::vector<Operator>& kraus) {
  if (kraus.empty()) throw ValidationError("empty Kraus family");
  const auto d = static_cast<Eigen::Index>(kraus.front().dim());
  Matrix sum = Matrix::Zero(d, d);
  for (const auto& k : kraus) {
    if (k.factors() != kraus.front().factors()) throw ValidationError("Kraus operators act on different spaces");
    sum += k.matrix().adjoint() * k.matrix();
  }
  const double v = detail::max_abs(sum - Matrix::Identity(d, d));
  return {v <= kKrausTol, v};
}

/// Lifts `op`, acting on a subset of `full` (in canonical order), to the
/// whole space by tensoring with identities on the remaining factors.
inline Operator embed(const Operator& op, const Factors& full) {
  if (op.factors() == full) return op;
  detail::validate_factors(full);
  if (!detail::is_canonical(full)) throw ValidationError("embedding target must be in canonical order");
  std::vector<std::size_t> where;
  for (const auto& f : op.factors()) {
    const std::size_t p = factor_position(full, f.name);
    if (full[p].dim != f.dim) throw ValidationError("dimension mismatch for space '" + f.name + "'");
    where.push_back(p);
  }
  const std::size_t n = full.size();
  std::vector<std::size_t> stride(n);
  std::size_t s = 1;
  for (std::size_t i = n; i-- > 0;) {
    stride[i] = s;
    s *= full[i].dim;
  }
  const auto total = static_cast<Eigen::Index>(s);
  std::vector<bool> in_op(n, false);
  for (auto p : where) in_op[p] = true;

  // Split every full index into (local op index, spectator offset).
  std::vector<std::size_t> local(s), spectator(s);
  std::vector<std::size_t> digit(n, 0);
  for (std::size_t lin = 0; lin < s; ++lin) {
    std::size_t l = 0, sp = 0;
    for (auto p : where) l = l * full[p].dim + digit[p];
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_op[i]) sp += digit[i] * stride[i];
    }
    local[lin] = l;
    spectator[lin] = sp;
    for (std::size_t i = n; i-- > 0;) {
      if (++digit[i] < full[i].dim) break;
      digit[i] = 0;
    }
  }
  Matrix out = Matrix::Zero(total, total);
  for (Eigen::Index i = 0; i < total; ++i) {
    for (Eigen::Index j = 0; j < total; ++j) {
      if (spectator[i] == spectator[j]) {
        out(i, j) = op.matrix()(static_cast<Eigen::Index>(local[i]), static_cast<Eigen::Index>(local[j]));
      }
    }
  }
  if (op.is_unitary()) return Operator::unitary(full, std::move(out));
  return Operator(full, std::move(out));
}

}  // namespace histsim
