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

#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

#include "histsim/clock_grid.hpp"
#include "test_util.hpp"

using namespace histsim;
using namespace histsim::testing;

namespace {

constexpr double kPi = std::numbers::pi;

TEST(MakeGrid, UnitSpacing) {
  const auto g = make_grid(8, 0, 8);
  EXPECT_DOUBLE_EQ(g.dt(), 1.0);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_DOUBLE_EQ(g.time(k), static_cast<double>(k));
}

TEST(MakeGrid, SymmetricWindowFrequencies) {
  const auto g = make_grid(8, -4, 4);
  EXPECT_DOUBLE_EQ(g.time(0), -4.0);
  EXPECT_DOUBLE_EQ(g.frequency(1) - g.frequency(0), kPi / 4);
  EXPECT_DOUBLE_EQ(g.frequency(-4), -kPi);
  EXPECT_DOUBLE_EQ(g.frequency(3), 3 * kPi / 4);
  EXPECT_THROW(g.frequency(4), ValidationError);
}

TEST(MakeGrid, InvalidInputs) {
  EXPECT_THROW(make_grid(7, 0, 1), ValidationError);
  EXPECT_THROW(make_grid(4, 0, 1), ValidationError);
  EXPECT_THROW(make_grid(8, 1, 1), ValidationError);
  EXPECT_THROW(make_grid(8, 2, 1), ValidationError);
}

TEST(MakeGrid, Snap) {
  const auto g = make_grid(8, 0, 8);
  EXPECT_EQ(g.snap(2.4), 2u);
  EXPECT_EQ(g.snap(2.6), 3u);
  EXPECT_EQ(g.snap(7.9), 7u);
  EXPECT_THROW(g.snap(8.0), ValidationError);
  EXPECT_THROW(g.snap(-0.1), ValidationError);
}

TEST(TimeOperator, DiagonalAndTrace) {
  const auto g = make_grid(8, 0, 8);
  const auto t = time_operator(g);
  EXPECT_TRUE(t.is_hermitian());
  for (Eigen::Index k = 0; k < 8; ++k) EXPECT_EQ(t.matrix()(k, k), cplx(static_cast<double>(k)));
  EXPECT_EQ(max_abs(t.matrix() - Matrix(t.matrix().diagonal().asDiagonal())), 0.0);

  const auto g2 = make_grid(64, -3.5, 5.25);
  const double expect = 64 * (g2.t_min() + 63 * g2.dt() / 2);
  EXPECT_NEAR(time_operator(g2).matrix().trace().real(), expect, 1e-12);
}

TEST(OmegaOperator, FlatVectorHasZeroFrequency) {
  const auto g = make_grid(32, -2, 6);
  const auto om = omega_operator(g);
  const Vector flat = Vector::Constant(32, 1.0 / std::sqrt(32.0));
  EXPECT_LE((om.matrix() * flat).norm(), 1e-12);
}

TEST(OmegaOperator, SampledPlaneWavesAreEigenvectors) {
  const auto g = make_grid(16, -1.5, 2.5);
  const auto om = omega_operator(g);
  for (long j = g.min_frequency_index(); j <= g.max_frequency_index(); ++j) {
    Vector col(16);
    for (Eigen::Index k = 0; k < 16; ++k) col(k) = std::polar(1.0, g.frequency(j) * g.time(std::size_t(k)));
    EXPECT_LE((om.matrix() * col - g.frequency(j) * col).cwiseAbs().maxCoeff(), 1e-10) << "j=" << j;
  }
}

TEST(OmegaOperator, SpectrumIsTheLattice) {
  const auto g = make_grid(8, 0, 3);
  const auto om = omega_operator(g);
  EXPECT_TRUE(om.is_hermitian());
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Matrix>(om.matrix()).eigenvalues();
  std::vector<double> want;
  for (long j = -4; j <= 3; ++j) want.push_back(g.frequency(j));
  std::sort(want.begin(), want.end());
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(ev(Eigen::Index(i)), want[i], 1e-10);
}

TEST(OmegaOperator, FastTransformMatchesDenseDft) {
  // Dense DFT oracle: Omega_kl = (1/N) sum_j omega_j exp(i omega_j (t_k - t_l)).
  const auto g = make_grid(16, -0.7, 1.9);
  const auto om = omega_operator(g);
  for (Eigen::Index k = 0; k < 16; ++k) {
    for (Eigen::Index l = 0; l < 16; ++l) {
      cplx s = 0;
      for (long j = -8; j <= 7; ++j) {
        s += g.frequency(j) * std::polar(1.0, g.frequency(j) * (g.time(std::size_t(k)) - g.time(std::size_t(l))));
      }
      EXPECT_NEAR(std::abs(om.matrix()(k, l) - s / 16.0), 0.0, 1e-12);
    }
  }
}

TEST(GaussianEnvelope, Normalized) {
  const auto g = make_grid(256, -8, 8);
  for (double n : {0.3, 1.0, 4.0}) {
    const auto env = gaussian_envelope(g, n);
    double s = 0;
    for (const auto& w : env.weights()) s += std::norm(w);
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_FALSE(env.warning().has_value());
  }
}

TEST(GaussianEnvelope, SecondMoment) {
  // |phi|^2 ~ exp(-2 t^2 / n) has variance n/4.
  const auto g = make_grid(256, -8, 8);
  const auto env = gaussian_envelope(g, 1.0);
  double m2 = 0;
  for (std::size_t k = 0; k < 256; ++k) m2 += std::norm(env[k]) * g.time(k) * g.time(k);
  EXPECT_NEAR(m2, 0.25, 0.0025);
}

TEST(GaussianEnvelope, WideLimitIsFlat) {
  const auto g = make_grid(64, -4, 4);
  const auto env = gaussian_envelope(g, 1e8);
  double lo = 1e300, hi = 0;
  for (const auto& w : env.weights()) {
    lo = std::min(lo, std::abs(w));
    hi = std::max(hi, std::abs(w));
  }
  EXPECT_GT(lo / hi, 1.0 - 1e-6);
  EXPECT_TRUE(env.is_flat(1e-6));
}

TEST(GaussianEnvelope, TruncationWarning) {
  EXPECT_TRUE(gaussian_envelope(make_grid(64, 1, 5), 1.0).warning().has_value());
  EXPECT_TRUE(gaussian_envelope(make_grid(64, -1, 1), 4.0).warning().has_value());
  EXPECT_THROW(gaussian_envelope(make_grid(64, 0, 1), -1.0), ValidationError);
  // Far outside the window the samples underflow to zero.
  EXPECT_THROW(gaussian_envelope(make_grid(64, 1000, 1001), 0.01), ValidationError);
}

TEST(FrequencyVector, ZeroIsFlat) {
  const auto g = make_grid(16, -3, 5);
  const auto f = frequency_vector(g, 0);
  for (Eigen::Index k = 0; k < 16; ++k) EXPECT_NEAR(std::abs(f.amplitudes()(k) - 0.25), 0.0, 1e-15);
}

TEST(FrequencyVector, Orthonormal) {
  const auto g = make_grid(16, 0.3, 2.1);
  for (long j = -8; j < 8; ++j) {
    for (long l = -8; l < 8; ++l) {
      const cplx ov = inner(frequency_vector(g, j), frequency_vector(g, l));
      EXPECT_NEAR(std::abs(ov - cplx(j == l ? 1.0 : 0.0)), 0.0, 1e-12);
    }
  }
  EXPECT_THROW(frequency_vector(g, 8), ValidationError);
}

TEST(FrequencyVector, GaussianFourierPair) {
  // <omega|phi> = sqrt(2 pi / L) phi_hat(omega) with
  // phi_hat(omega) = (2/(n pi))^{1/4} sqrt(n pi) exp(-n omega^2 / 4) / sqrt(2 pi).
  const auto g = make_grid(256, -8, 8);
  const double n = 1.0, len = 16.0;
  const auto env = gaussian_envelope(g, n);
  const auto phi = env.as_state();
  double worst = 0;
  for (long j = g.min_frequency_index(); j <= g.max_frequency_index(); ++j) {
    const double w = g.frequency(j);
    const double hat = std::pow(2.0 / (n * kPi), 0.25) * std::sqrt(n * kPi) * std::exp(-n * w * w / 4) /
                       std::sqrt(2 * kPi);
    const cplx got = inner(frequency_vector(g, j), phi);
    worst = std::max(worst, std::abs(got - std::sqrt(2 * kPi / len) * hat));
  }
  EXPECT_LE(worst, 1e-3);
}

TEST(Commutator, DefectSmallAndShrinking) {
  // Probe Gaussian exp(-t^2 / 0.1) centred in [-16, 16).
  double prev = 0;
  for (std::size_t n : {128u, 256u, 512u}) {
    const auto g = make_grid(n, -16, 16);
    const double d = commutator_defect(g, centered_gaussian(g, 0.1));
    if (n == 256) {
      EXPECT_LE(d, 0.01);
    }
    if (n > 128) {
      EXPECT_LE(d, prev / 2) << "N=" << n;
    }
    prev = d;
  }
}

TEST(SpectralDerivative, PlaneWave) {
  const auto g = make_grid(32, 0, 2 * kPi);
  std::vector<cplx> v(32);
  for (std::size_t k = 0; k < 32; ++k) v[k] = std::sin(3 * g.time(k));
  const auto d = spectral_derivative(g, v);
  for (std::size_t k = 0; k < 32; ++k) EXPECT_NEAR(std::abs(d[k] - 3 * std::cos(3 * g.time(k))), 0.0, 1e-12);
}

}  // namespace
