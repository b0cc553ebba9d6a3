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

// Seeded generators and test-only oracles shared by the test suites.

#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "histsim/tensor.hpp"

namespace histsim::testing {

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = cplx(g(rng), g(rng));
  }
  return m;
}

inline Matrix random_hermitian(std::mt19937_64& rng, Eigen::Index d, double scale = 1.0) {
  const Matrix a = random_matrix(rng, d, d);
  return scale * 0.5 * (a + a.adjoint());
}

/// Q factor of a random complex matrix; the Gram check is done by callers.
inline Matrix random_unitary(std::mt19937_64& rng, Eigen::Index d) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, d, d));
  return qr.householderQ() * Matrix::Identity(d, d);
}

inline Vector random_unit_vector(std::mt19937_64& rng, Eigen::Index d) {
  Matrix v = random_matrix(rng, d, 1);
  return v.col(0) / v.norm();
}

/// Random instrument with `outcomes` Kraus operators on dimension d, cut from
/// the first d columns of a random unitary on d * outcomes.
inline std::vector<Matrix> random_kraus(std::mt19937_64& rng, Eigen::Index d, Eigen::Index outcomes) {
  const Matrix u = random_unitary(rng, d * outcomes);
  std::vector<Matrix> ks;
  for (Eigen::Index a = 0; a < outcomes; ++a) ks.push_back(u.block(a * d, 0, d, d));
  return ks;
}

/// exp(-i H theta) by scaling and squaring of a truncated Taylor series;
/// deliberately independent of the eigendecomposition route.
inline Matrix taylor_exp(const Matrix& h, double theta) {
  const Eigen::Index d = h.rows();
  Matrix a = cplx(0.0, -theta) * h;
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm / std::pow(2.0, squarings) > 0.25) ++squarings;
  a /= std::pow(2.0, squarings);
  Matrix term = Matrix::Identity(d, d);
  Matrix sum = Matrix::Identity(d, d);
  for (int k = 1; k <= 30; ++k) {
    term = term * a / static_cast<double>(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

inline Matrix pauli_x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline Matrix pauli_y() {
  Matrix m(2, 2);
  m << 0, cplx(0, -1), cplx(0, 1), 0;
  return m;
}
inline Matrix pauli_z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

}  // namespace histsim::testing
