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

#include <numbers>
#include <random>

#include "histsim/measurement.hpp"
#include "test_util.hpp"

using namespace histsim;
using namespace histsim::testing;

namespace {

constexpr double kPi = std::numbers::pi;
const SpaceLabel kQ{"Q", 2};
const cplx kI(0.0, 1.0);

Vector ket(cplx a, cplx b) {
  Vector v(2);
  v << a, b;
  return v;
}

HamiltonianSpec rabi() { return HamiltonianSpec::constant(Operator({kQ}, (kPi / 2) * pauli_x())); }

KrausInstrument z_instrument() { return instrument_from_projectors({ket(1, 0), ket(0, 1)}); }

MeasurementSchedule rabi_schedule(int events) {
  std::vector<MeasurementEvent> ev{{0.5, z_instrument(), MemorySpec("M1", 2)}};
  if (events > 1) ev.push_back({1.0, z_instrument(), MemorySpec("M2", 2)});
  return MeasurementSchedule(rabi(), ev);
}

ClockGrid rabi_grid() { return make_grid(128, 0, 2); }

TEST(Projectors, ZBasis) {
  const auto z = z_instrument();
  ASSERT_EQ(z.outcomes(), 2u);
  EXPECT_EQ(z.kraus(0).matrix(), Matrix(ket(1, 0) * ket(1, 0).adjoint()));
  EXPECT_EQ(z.kraus(1).matrix(), Matrix(ket(0, 1) * ket(0, 1).adjoint()));
}

TEST(Projectors, XBasisComplete) {
  const double s = 1 / std::numbers::sqrt2;
  const auto x = instrument_from_projectors({ket(s, s), ket(s, -s)});
  EXPECT_TRUE(x.certificate().complete);
  EXPECT_LE(x.certificate().violation, 1e-15);
}

TEST(Projectors, QutritRankOne) {
  std::mt19937_64 rng(1);
  const Matrix u = random_unitary(rng, 3);
  const auto inst = instrument_from_projectors({u.col(0), u.col(1), u.col(2)});
  ASSERT_EQ(inst.outcomes(), 3u);
  for (std::size_t a = 0; a < 3; ++a) {
    const Matrix& p = inst.kraus(a).matrix();
    EXPECT_LE(max_abs(p * p - p), 1e-12);
    EXPECT_NEAR(p.trace().real(), 1.0, 1e-12);
  }
}

TEST(Projectors, RejectsNonOrthonormal) {
  EXPECT_THROW(instrument_from_projectors({ket(1, 0), ket(1, 1) / std::numbers::sqrt2}), ValidationError);
  EXPECT_THROW(instrument_from_projectors({ket(1, 0)}), ValidationError);
}

TEST(Dilation, ProjectiveRecord) {
  std::mt19937_64 rng(2);
  const MemorySpec m("M1", 2);
  const auto v = dilate_instrument(z_instrument(), m);
  EXPECT_TRUE(v.is_unitary());
  EXPECT_LE(unitarity_defect(v.matrix()), 1e-10);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector psi = random_unit_vector(rng, 2);
    const auto out = apply(v, kron(StateVector({kQ}, psi), StateVector({m.space()}, m.ready())));
    Vector want = Vector::Zero(6);
    want(0) = psi(0);  // |0>|0>
    want(4) = psi(1);  // |1>|1>
    EXPECT_LE((out.amplitudes() - want).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Dilation, NonProjectiveStatistics) {
  std::mt19937_64 rng(3);
  const KrausInstrument inst({Operator({kQ}, std::sqrt(0.3) * Matrix::Identity(2, 2)),
                              Operator({kQ}, std::sqrt(0.7) * pauli_x())});
  const MemorySpec m("M1", 2);
  const auto v = dilate_instrument(inst, m);
  const Vector psi = random_unit_vector(rng, 2);
  const auto out = apply(v, kron(StateVector({kQ}, psi), StateVector({m.space()}, m.ready())));
  for (std::size_t a = 0; a < 2; ++a) {
    EXPECT_NEAR(partial_project(out, "M1", a).squared_norm(), (inst.kraus(a).matrix() * psi).squaredNorm(), 1e-12);
  }
}

TEST(Dilation, CompletionDoesNotChangeStatistics) {
  std::mt19937_64 rng(4);
  const SpaceLabel q{"Q", 3};
  std::vector<Operator> ks;
  for (const auto& k : random_kraus(rng, 3, 2)) ks.emplace_back(Factors{q}, k);
  const KrausInstrument inst(ks);
  const MemorySpec m("M1", 2);
  const auto fwd = dilate_instrument(inst, m, Completion::kForward);
  const auto rev = dilate_instrument(inst, m, Completion::kReverse);
  EXPECT_GT(max_abs(fwd.matrix() - rev.matrix()), 1e-3);
  const Vector psi = random_unit_vector(rng, 3);
  const auto in = kron(StateVector({q}, psi), StateVector({m.space()}, m.ready()));
  EXPECT_LE((apply(fwd, in).amplitudes() - apply(rev, in).amplitudes()).norm(), 1e-12);

  const MeasurementSchedule sched(HamiltonianSpec::constant(Operator({q}, random_hermitian(rng, 3))),
                                  {{0.25, inst, m}, {0.6, inst, MemorySpec("M2", 2)}});
  const auto g = make_grid(32, 0, 1);
  const StateVector psi0({q}, psi);
  const auto a = build_measured_history(sched, psi0, 0.0, flat_envelope(g), kDefaultSubsteps, Completion::kForward);
  const auto b = build_measured_history(sched, psi0, 0.0, flat_envelope(g), kDefaultSubsteps, Completion::kReverse);
  for (std::size_t k = 0; k < 32; ++k) {
    for (std::size_t x = 0; x < 3; ++x)
      for (std::size_t y = 0; y < 3; ++y) {
        EXPECT_NEAR(joint_prob(a, {{"M1", x}, {"M2", y}}, g.time(k)), joint_prob(b, {{"M1", x}, {"M2", y}}, g.time(k)),
                    1e-12);
      }
  }
}

TEST(Dilation, MemoryTooSmall) {
  const KrausInstrument three({Operator({kQ}, std::sqrt(0.2) * Matrix::Identity(2, 2)),
                               Operator({kQ}, std::sqrt(0.3) * Matrix::Identity(2, 2)),
                               Operator({kQ}, std::sqrt(0.5) * Matrix::Identity(2, 2))});
  EXPECT_THROW(dilate_instrument(three, MemorySpec("M1", 2)), ValidationError);
}

TEST(MeasuredHistory, EmptyScheduleIsFreeHistoryWithReadyMemory) {
  const auto g = rabi_grid();
  const MeasurementSchedule none(rabi(), {});
  const auto a = build_measured_history(none, StateVector::basis(kQ, 0), 0.0, gaussian_envelope(g, 1.0));
  const auto b = build_history(rabi(), StateVector::basis(kQ, 0), 0.0, gaussian_envelope(g, 1.0));
  for (std::size_t k = 0; k < g.size(); ++k) {
    EXPECT_LE((a.branch(k).amplitudes() - b.branch(k).amplitudes()).norm(), 1e-14);
  }
}

TEST(MeasuredHistory, SingleMeasurementTermByTerm) {
  const auto g = rabi_grid();
  const auto sched = rabi_schedule(1);
  const auto h = build_measured_history(sched, StateVector::basis(kQ, 0), 0.0, flat_envelope(g));
  const auto& z = z_instrument();
  const Vector psi_t1 = ket(1, -kI) / std::numbers::sqrt2;
  const MemorySpec m("M1", 2);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double t = g.time(k);
    Vector want;
    if (t < 0.5) {
      want = detail::kron_vector(evolve_const(rabi().at(0), StateVector::basis(kQ, 0), t, 0).amplitudes(), m.ready());
    } else {
      want = Vector::Zero(6);
      for (std::size_t a = 0; a < 2; ++a) {
        const Vector post = SpectralPropagator(rabi().matrix_at(0))(t - 0.5) * z.kraus(a).matrix() * psi_t1;
        want += detail::kron_vector(post, StateVector::basis(m.space(), a).amplitudes());
      }
    }
    EXPECT_LE((condition_on_time(h, t).amplitudes() - want).norm(), 1e-12) << "t=" << t;
  }
  EXPECT_NEAR(h.squared_norm(), 1.0, 1e-10);
}

TEST(MeasuredHistory, Errors) {
  const auto g = rabi_grid();
  EXPECT_THROW(build_measured_history(rabi_schedule(2), StateVector::basis(kQ, 0), 0.75, flat_envelope(g)),
               ValidationError);
  const MeasurementSchedule late(rabi(), {{5.0, z_instrument(), MemorySpec("M1", 2)}});
  EXPECT_THROW(build_measured_history(late, StateVector::basis(kQ, 0), 0.0, flat_envelope(g)), ValidationError);
}

TEST(Schedule, Validation) {
  EXPECT_THROW(MeasurementSchedule(rabi(), {{1.0, z_instrument(), MemorySpec("M1", 2)},
                                            {0.5, z_instrument(), MemorySpec("M2", 2)}}),
               ValidationError);
  EXPECT_THROW(MeasurementSchedule(rabi(), {{0.5, z_instrument(), MemorySpec("M1", 2)},
                                            {1.0, z_instrument(), MemorySpec("M1", 2)}}),
               ValidationError);
  EXPECT_THROW(MeasurementSchedule(rabi(), {{0.5, z_instrument(), MemorySpec("M1", 3)}}), ValidationError);
  EXPECT_THROW(MemorySpec("Q", 2), ValidationError);
  EXPECT_THROW(MemorySpec("M1", 2, ket(1, 0)), ValidationError);
}

TEST(JointProb, StepFunctionSingleMeasurement) {
  const auto g = rabi_grid();
  const auto h = build_measured_history(rabi_schedule(1), StateVector::basis(kQ, 0), 0.0, gaussian_envelope(g, 4.0));
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double t = g.time(k);
    for (std::size_t a = 0; a < 2; ++a) {
      EXPECT_NEAR(joint_prob(h, {{"M1", a}}, t), t < 0.5 ? 0.0 : 0.5, 1e-9) << "t=" << t;
    }
  }
}

TEST(JointProb, TwoMeasurementsQuarterTable) {
  const auto g = rabi_grid();
  const auto h = build_measured_history(rabi_schedule(2), StateVector::basis(kQ, 0), 0.0, flat_envelope(g));
  for (double t : {1.0, 1.25, 1.9}) {
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b) EXPECT_NEAR(joint_prob(h, {{"M1", a}, {"M2", b}}, t), 0.25, 1e-9);
  }
}

TEST(JointProb, CustomReadyStateBeforeEvent) {
  const auto g = rabi_grid();
  Vector ready(3);
  ready << 0.6, cplx(0, 0.48), 0.64;
  const MeasurementSchedule sched(rabi(), {{0.5, z_instrument(), MemorySpec("M1", 2, ready)}});
  const auto h = build_measured_history(sched, StateVector::basis(kQ, 0), 0.0, flat_envelope(g));
  EXPECT_NEAR(joint_prob(h, {{"M1", 0}}, 0.25), 0.36, 1e-12);
  EXPECT_NEAR(joint_prob(h, {{"M1", 1}}, 0.25), 0.2304, 1e-12);
  EXPECT_NEAR(joint_prob(h, {{"M1", 0}}, 0.75), 0.5, 1e-12);
}

TEST(JointProb, Errors) {
  const auto g = make_grid(64, -8, 8);
  const auto h = build_measured_history(rabi_schedule(2), StateVector::basis(kQ, 0), 0.0, gaussian_envelope(g, 1.0));
  EXPECT_THROW(joint_prob(h, {{"M3", 0}}, 1.0), ValidationError);
  EXPECT_THROW(joint_prob(h, {{"M1", 3}}, 1.0), ValidationError);
  EXPECT_THROW(joint_prob(h, {{"Q", 0}}, 1.0), ValidationError);
  EXPECT_THROW(joint_prob(h, {{"M1", 0}}, -7.9), NumericalGuardError);
}

TEST(MarginalProb, CompletenessAndSummation) {
  const auto g = rabi_grid();
  const auto h = build_measured_history(rabi_schedule(2), StateVector::basis(kQ, 0), 0.0, flat_envelope(g));
  for (std::size_t k = 0; k < g.size(); k += 5) {
    const double t = g.time(k);
    EXPECT_NEAR(marginal_prob(h, {}, t), 1.0, 1e-12);
    for (std::size_t b = 0; b < 3; ++b) {
      EXPECT_NEAR(marginal_prob(h, {{"M2", b}}, t), marginal_by_summation(h, {{"M2", b}}, t), 1e-12);
    }
    if (t < 1.0) {
      EXPECT_NEAR(marginal_prob(h, {{"M2", 0}}, t), 0.0, 1e-15);
    }
  }
}

TEST(ConditionalProb, RabiHalf) {
  const auto g = rabi_grid();
  const auto h = build_measured_history(rabi_schedule(2), StateVector::basis(kQ, 0), 0.0, flat_envelope(g));
  EXPECT_NEAR(conditional_prob(h, {"M2", 0, 1.0}, {"M1", 0, 0.5}), 0.5, 1e-9);
  // Bayes reconstruction.
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 2; ++b) {
      const double c = conditional_prob(h, {"M2", b, 1.5}, {"M1", a, 0.75});
      EXPECT_NEAR(c * marginal_prob(h, {{"M1", a}}, 0.75), joint_prob(h, {{"M1", a}, {"M2", b}}, 1.5), 1e-12);
    }
  }
}

TEST(ConditionalProb, DeterministicChain) {
  const MeasurementSchedule sched(HamiltonianSpec::zero(2), {{0.5, z_instrument(), MemorySpec("M1", 2)},
                                                             {1.0, z_instrument(), MemorySpec("M2", 2)}});
  const auto h = build_measured_history(sched, StateVector::basis(kQ, 0), 0.0, flat_envelope(rabi_grid()));
  EXPECT_NEAR(conditional_prob(h, {"M2", 0, 1.5}, {"M1", 0, 0.5}), 1.0, 1e-12);
}

TEST(ConditionalProb, Guards) {
  const auto h = build_measured_history(rabi_schedule(2), StateVector::basis(kQ, 0), 0.0, flat_envelope(rabi_grid()));
  EXPECT_THROW(conditional_prob(h, {"M2", 0, 1.0}, {"M1", 0, 0.25}), NumericalGuardError);
  EXPECT_THROW(conditional_prob(h, {"M2", 0, 0.6}, {"M1", 0, 0.8}), ValidationError);
  EXPECT_THROW(conditional_prob(h, {"M1", 0, 1.0}, {"M1", 0, 0.8}), ValidationError);
}

TEST(MultiTimeJoint, ReducesToLatestTime) {
  const auto g = rabi_grid();
  const auto h = build_measured_history(rabi_schedule(2), StateVector::basis(kQ, 0), 0.0, flat_envelope(g));
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 2; ++b) {
      const double mt = multi_time_joint(h, {{"M1", a, 0.5}, {"M2", b, 1.25}});
      EXPECT_EQ(mt, joint_prob(h, {{"M1", a}, {"M2", b}}, 1.25));
      EXPECT_NEAR(mt, 0.25, 1e-9);
    }
  }
  // Between the events P(b,a|t) does not depend on where t sits.
  for (std::size_t a = 0; a < 2; ++a) {
    EXPECT_EQ(joint_prob(h, {{"M1", a}, {"M2", 0}}, 0.75), joint_prob(h, {{"M1", a}, {"M2", 0}}, 0.5));
  }
}

TEST(MultiTimeJoint, Errors) {
  const auto h = build_measured_history(rabi_schedule(2), StateVector::basis(kQ, 0), 0.0, flat_envelope(rabi_grid()));
  EXPECT_THROW(multi_time_joint(h, {{"M1", 0, 1.25}, {"M2", 0, 1.25}}), ValidationError);
  EXPECT_THROW(multi_time_joint(h, {{"M1", 0, 0.25}, {"M2", 0, 1.25}}), ValidationError);
  EXPECT_THROW(multi_time_joint(h, {}), ValidationError);
}

TEST(NonDisturbance, LaterEventLeavesEarlierStatistics) {
  const auto g = rabi_grid();
  const auto one = build_measured_history(rabi_schedule(1), StateVector::basis(kQ, 0), 0.0, flat_envelope(g));
  const auto two = build_measured_history(rabi_schedule(2), StateVector::basis(kQ, 0), 0.0, flat_envelope(g));
  for (std::size_t k = 0; k < g.size(); ++k) {
    for (std::size_t a = 0; a < 3; ++a) {
      EXPECT_NEAR(joint_prob(one, {{"M1", a}}, g.time(k)), joint_prob(two, {{"M1", a}}, g.time(k)), 1e-12);
    }
  }
}

TEST(TwoMeasurementIdentities, RabiPassesAndFaultFails) {
  const auto g = make_grid(64, 0, 2);
  const auto sched = rabi_schedule(2);
  const auto psi0 = StateVector::basis(kQ, 0);
  const auto h = build_measured_history(sched, psi0, 0.0, flat_envelope(g));
  const auto rep = check_two_measurement_identities(h, sched, psi0);
  EXPECT_LE(rep.max(), 1e-9);
  EXPECT_GT(rep.comparisons, 0u);

  const auto bad = corrupt_branch(h, g.snap(1.5), "M1");
  EXPECT_NEAR(bad.squared_norm(), 1.0, 1e-12);
  const auto bad_rep = check_two_measurement_identities(bad, sched, psi0);
  EXPECT_GT(bad_rep.joint, 1e-3);
  EXPECT_GT(bad_rep.two_time, 1e-3);
}

TEST(TwoMeasurementIdentities, NeedsTwoEvents) {
  const auto h = build_measured_history(rabi_schedule(1), StateVector::basis(kQ, 0), 0.0, flat_envelope(rabi_grid()));
  EXPECT_THROW(check_two_measurement_identities(h, rabi_schedule(1), StateVector::basis(kQ, 0)), ValidationError);
}

}  // namespace
