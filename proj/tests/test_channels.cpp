#include <gtest/gtest.h>

#include "epsim/channels.hpp"
#include "epsim/oracle.hpp"
#include "epsim/random.hpp"

using namespace epsim;

namespace {

Matrix kraus_sum(const std::vector<Matrix>& kraus, const Matrix& rho) {
  Matrix out = Matrix::Zero(kraus.front().rows(), kraus.front().rows());
  for (const auto& a : kraus) out += a * rho * a.adjoint();
  return out;
}

Channel random_channel(Rng& rng, Index d1, Index d2, Index count) {
  return Channel(random_kraus(d1, d2, count, rng));
}

}  // namespace

TEST(Channel, RejectsNonTracePreserving) {
  EXPECT_THROW(Channel({2.0 * Matrix::Identity(2, 2)}), Error);
  EXPECT_THROW(Channel(std::vector<Matrix>{}), Error);
}

TEST(Apply, IdentityDepolarizingAndKrausSum) {
  Rng rng(1);
  const Matrix rho = random_density(2, rng);
  EXPECT_LT((epsim::apply(identity_channel(2), rho) - rho).norm(), 1e-14);
  EXPECT_LT((epsim::apply(depolarizing(2), projector(basis_vector(2, 0))) - Matrix::Identity(2, 2) / 2.0).norm(), 1e-12);
  const auto kraus = random_kraus(3, 3, 3, rng);
  const Matrix r3 = random_density(3, rng);
  EXPECT_LT((epsim::apply(Channel(kraus), r3) - kraus_sum(kraus, r3)).norm(), 1e-12);
  EXPECT_THROW(epsim::apply(identity_channel(2), random_density(3, rng)), Error);
}

TEST(Choi, IdentityIsBellState) {
  const auto w = to_choi(identity_channel(2));
  EXPECT_LT((w.matrix - projector(bell_vector(2))).norm(), 1e-14);
}

TEST(Choi, DepolarizingIsMaximallyMixed) {
  for (Index d : {2, 3}) {
    const auto w = to_choi(depolarizing(d));
    EXPECT_LT((w.matrix - Matrix::Identity(d * d, d * d) / double(d * d)).norm(), 1e-12);
  }
}

TEST(Choi, InvariantsAndRank) {
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    const auto ch = random_channel(rng, 2 + k % 3, 2 + (k / 3) % 3, 1 + k % 3);
    const auto w = to_choi(ch);
    EXPECT_NO_THROW(validate(w));
    EXPECT_NEAR(w.matrix.trace().real(), 1.0, 1e-10);
    const Index d1 = ch.in_dim();
    EXPECT_LT((input_marginal(w) - Matrix::Identity(d1, d1) / double(d1)).norm(), 1e-10);
    const auto back = from_choi(w);
    EXPECT_EQ(back.kraus_count(), ch.kraus_count());
  }
}

TEST(Choi, RoundTripPreservesAction) {
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    std::uniform_int_distribution<Index> dim(1, 4);
    const Index d1 = dim(rng), d2 = dim(rng);
    const Index count = (d1 + d2 - 1) / d2 + k % 2;
    const auto ch = random_channel(rng, d1, d2, count);
    const auto w = to_choi(ch);
    const auto back = from_choi(w);
    for (int s = 0; s < 10; ++s) {
      const Matrix rho = random_density(d1, rng);
      const Matrix direct = epsim::apply(ch, rho);
      EXPECT_LT((epsim::apply(back, rho) - direct).norm(), 1e-10);
      EXPECT_LT((choi_apply(w, rho) - direct).norm(), 1e-12);
    }
  }
}

TEST(Choi, UnitaryGivesSingleKrausUpToPhase) {
  Rng rng(4);
  const Matrix u = random_unitary(3, rng);
  const auto back = from_choi(to_choi(unitary_channel(u)));
  ASSERT_EQ(back.kraus_count(), 1u);
  const Matrix k = back.kraus()[0];
  const Complex phase = (u.adjoint() * k).trace() / 3.0;
  EXPECT_NEAR(std::abs(phase), 1.0, 1e-10);
  EXPECT_LT((k - phase * u).norm(), 1e-10);
}

TEST(Choi, RejectsInvalidMatrices) {
  ChoiState bad{2, 2, Matrix::Identity(4, 4)};
  EXPECT_THROW(from_choi(bad), Error);
  Matrix skew = Matrix::Identity(4, 4) / 4.0;
  skew(0, 0) += 0.1;
  skew(3, 3) -= 0.1;
  EXPECT_THROW(from_choi(ChoiState{2, 2, skew}), Error);
}

TEST(ChoiApply, ExamplesFromTheReadoutIdentity) {
  const Vector plus = Vector::Constant(2, 1.0 / std::sqrt(2.0));
  EXPECT_LT((choi_apply(to_choi(identity_channel(2)), projector(plus)) - projector(plus)).norm(), 1e-14);
  Rng rng(5);
  const auto ch = random_channel(rng, 3, 2, 2);
  const Matrix mixed = Matrix::Identity(3, 3) / 3.0;
  EXPECT_LT((choi_apply(to_choi(ch), mixed) - epsim::apply(ch, mixed)).norm(), 1e-12);
}

TEST(StateMeasurement, MixedAndPureExamples) {
  const auto m = state_measurement(Matrix::Identity(3, 3) / 3.0);
  EXPECT_LT((m.m0 - Matrix::Identity(3, 3) / std::sqrt(3.0)).norm(), 1e-12);
  EXPECT_LT((m.m1 - std::sqrt(2.0 / 3.0) * Matrix::Identity(3, 3)).norm(), 1e-12);
  const auto p = state_measurement(projector(basis_vector(2, 0)));
  EXPECT_LT((p.m0 - projector(basis_vector(2, 0))).norm(), 1e-10);
  EXPECT_LT((p.m1 - projector(basis_vector(2, 1))).norm(), 1e-10);
  EXPECT_THROW(state_measurement(Matrix::Identity(2, 2)), Error);
}

// prepare omega_Phi, measure {M0, M1} on the input leg, read A on the output; exact branches
TEST(StateMeasurement, TwoBranchReconstructionWithOffset) {
  Rng rng(6);
  for (int k = 0; k < 50; ++k) {
    const Index d1 = 2 + k % 3, d2 = 2 + (k / 3) % 2;
    const auto ch = random_channel(rng, d1, d2, 2);
    const Matrix rho = random_density(d1, rng);
    const Matrix a = random_hermitian(d2, rng);
    const auto meas = state_measurement(rho);
    EXPECT_LT(completeness_defect(meas), 1e-10);
    oracle::BranchPlan plan{{d2, d1}, to_choi(ch).matrix, {}};
    plan.steps.push_back(oracle::BranchStep::measure({1}, meas));
    plan.steps.push_back(oracle::BranchStep::discard({1}));
    const auto branches = oracle::channel_branch_simulate(plan);
    ASSERT_EQ(branches.size(), 2u);
    const double p0 = branches[0].probability, p1 = branches[1].probability;
    const double e0 = oracle::branch_expectation(branches[0], {0}, a).real() / p0;
    const double e1 = oracle::branch_expectation(branches[1], {0}, a).real() / p1;
    const double offset = (a * apply_linear(ch, Matrix::Identity(d1, d1))).trace().real();
    const double target = (a * epsim::apply(ch, rho)).trace().real();
    EXPECT_NEAR(reconstruct_from_branches(p0, e0, p1, e1, offset, d1), target, 1e-10);
    // single-route forms
    EXPECT_NEAR(double(d1) * p0 * e0, target, 1e-10);
    EXPECT_NEAR(offset - double(d1) * p1 * e1, target, 1e-10);
    // per-shot estimator averaged over the exact branch distribution
    EXPECT_NEAR(p0, 1.0 / double(d1), 1e-10);
    const double mean = p0 * heralded_shot_value(0, e0, offset, d1) + p1 * heralded_shot_value(1, e1, offset, d1);
    EXPECT_NEAR(mean, target, 1e-10);
  }
}

TEST(Stinespring, IdentityAndDilationCheck) {
  const auto id = stinespring(identity_channel(2));
  EXPECT_EQ(id.ancilla_dim, 1);
  EXPECT_LT((id.unitary - Matrix::Identity(2, 2)).norm(), 1e-14);
  Rng rng(7);
  for (int k = 0; k < 10; ++k) {
    const auto ch = random_channel(rng, 2 + k % 3, 2 + k % 2, 1 + k % 3);
    const auto dil = stinespring(ch);
    EXPECT_LT(unitarity_defect(dil.unitary), 1e-10);
    for (int s = 0; s < 10; ++s) {
      const Matrix rho = random_density(ch.in_dim(), rng);
      EXPECT_LT((dilation_apply(dil, rho) - epsim::apply(ch, rho)).norm(), 1e-10);
    }
  }
}

TEST(PurifiedChoi, ReducesToChoi) {
  const auto p = purified_choi(identity_channel(2));
  EXPECT_LT((p.vector - bell_vector(2)).norm(), 1e-14);
  Rng rng(8);
  const Matrix u = random_unitary(2, rng);
  const Vector target = kron(u, Matrix::Identity(2, 2)) * bell_vector(2);
  EXPECT_LT((purified_choi(unitary_channel(u)).vector - target).norm(), 1e-12);
  for (int k = 0; k < 10; ++k) {
    const auto ch = random_channel(rng, 3, 2, 3);
    EXPECT_NEAR(purified_choi(ch).vector.norm(), 1.0, 1e-12);
    EXPECT_LT((reduce_ancilla(purified_choi(ch)).matrix - to_choi(ch).matrix).norm(), 1e-10);
  }
}

TEST(Transfer, ActionCompositionAndObservableForm) {
  EXPECT_LT((transfer(identity_channel(2)).matrix - Matrix::Identity(4, 4)).norm(), 1e-14);
  Rng rng(9);
  for (int k = 0; k < 10; ++k) {
    const auto c1 = random_channel(rng, 2, 3, 2), c2 = random_channel(rng, 3, 2, 2);
    const Matrix rho = random_density(2, rng);
    EXPECT_LT((transfer(c1).matrix * vectorize(rho).entries - vectorize(epsim::apply(c1, rho)).entries).norm(), 1e-12);
    EXPECT_LT((transfer(compose(c2, c1)).matrix - transfer(c2).matrix * transfer(c1).matrix).norm(), 1e-12);
    EXPECT_LT((transfer_obs(c1, Matrix::Identity(2, 2)).matrix - transfer(c1).matrix).norm(), 1e-12);
  }
  EXPECT_THROW(transfer_obs(random_channel(rng, 2, 2, 2), Matrix::Identity(3, 3)), Error);
}

TEST(Depolarizing, OutputIsMaximallyMixed) {
  Rng rng(10);
  for (Index d : {2, 3, 4}) {
    const Matrix rho = random_density(d, rng);
    EXPECT_LT((epsim::apply(depolarizing(d), rho) - Matrix::Identity(d, d) / double(d)).norm(), 1e-12);
  }
  EXPECT_THROW(depolarizing(1), Error);
}

TEST(Oqt, FormulaMixingAndPositivity) {
  const auto p2 = oqt_channel(2);
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = 1.0 / 3.0;
  expected(1, 1) = 2.0 / 3.0;
  EXPECT_LT((p2.apply(projector(basis_vector(2, 0))) - expected).norm(), 1e-14);
  Rng rng(11);
  for (Index d = 2; d <= 4; ++d) {
    const auto p = oqt_channel(d);
    const Matrix rho = random_density(d, rng);
    const double dd = double(d * d);
    const Matrix mix = rho / dd + (dd - 1.0) / dd * p.apply(rho);
    EXPECT_LT((mix - Matrix::Identity(d, d) / double(d)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((p.apply(rho) - p.formula(rho)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_GE(eigh(p.choi.matrix).values.minCoeff(), -1e-12);
    EXPECT_LT((epsim::apply(p.channel(), rho) - p.formula(rho)).norm(), 1e-10);
  }
  EXPECT_THROW(oqt_channel(1), Error);
}

TEST(BellMeasurement, OutcomeProbabilities) {
  for (Index d : {2, 3}) {
    const auto m = bell_binary_measurement(d);
    const auto [a0, a1] = outcome_probabilities(m, projector(bell_vector(d)));
    EXPECT_NEAR(a0, 1.0, 1e-12);
    EXPECT_NEAR(a1, 0.0, 1e-12);
    const auto [b0, b1] = outcome_probabilities(m, Matrix::Identity(d * d, d * d) / double(d * d));
    EXPECT_NEAR(b0, 1.0 / double(d * d), 1e-12);
    EXPECT_NEAR(b1, 1.0 - 1.0 / double(d * d), 1e-12);
  }
}

// input rho on leg 0, Bell pair on legs (1, 2); Bell-measure (0, 1) and read leg 2
TEST(BellMeasurement, TeleportationBranchesAreIdentityAndFailureMap) {
  Rng rng(12);
  const Index d = 2;
  const auto p = oqt_channel(d);
  for (int k = 0; k < 5; ++k) {
    const Matrix rho = random_density(d, rng);
    oracle::BranchPlan plan{{d, d, d}, kron(rho, projector(bell_vector(d))), {}};
    plan.steps.push_back(oracle::BranchStep::measure({0, 1}, bell_binary_measurement(d)));
    plan.steps.push_back(oracle::BranchStep::discard({0, 1}));
    const auto br = oracle::channel_branch_simulate(plan);
    ASSERT_EQ(br.size(), 2u);
    EXPECT_NEAR(br[0].probability, 1.0 / 4.0, 1e-12);
    EXPECT_LT((br[0].state / br[0].probability - rho).norm(), 1e-12);
    EXPECT_LT((br[1].state / br[1].probability - p.apply(rho)).norm(), 1e-12);
  }
}
