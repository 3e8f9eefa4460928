#include <gtest/gtest.h>

#include "epsim/hamiltonians.hpp"
#include "epsim/network.hpp"
#include "epsim/oracle.hpp"

using namespace epsim;

TEST(ApplyCircuit, EmptyAndCnot) {
  Rng rng(91);
  const oracle::DenseState s{{2, 2, 2}, random_state(8, rng)};
  EXPECT_LT((oracle::apply_circuit(s, BrickworkCircuit{3, 2, {}}).amplitudes - s.amplitudes).norm(), 1e-15);
  const std::array<Index, 2> ten{1, 0};
  const auto out = oracle::apply_circuit(oracle::basis_state({2, 2}, ten), BrickworkCircuit{2, 2, {{{0, gates::cnot()}}}});
  EXPECT_LT((out.amplitudes - basis_vector(4, 3)).norm(), 1e-15);
}

TEST(ApplyCircuit, PreservesNormAndMatchesUnitary) {
  Rng rng(92);
  for (int n = 2; n <= 5; ++n) {
    const auto c = random_brickwork(n, 3, 2, rng);
    const oracle::DenseState s{std::vector<Index>(n, 2), random_state(Index{1} << n, rng)};
    const auto out = oracle::apply_circuit(s, c);
    EXPECT_NEAR(out.amplitudes.norm(), 1.0, 1e-12);
    EXPECT_LT((out.amplitudes - oracle::circuit_unitary(c) * s.amplitudes).norm(), 1e-12);
  }
}

TEST(ApplyCircuit, AgreesWithExactUnitaryForCommutingTerms) {
  Rng rng(93);
  for (int n = 2; n <= 4; ++n) {
    const auto h = build_tfim(n, 0.9, 0.0);
    const oracle::DenseState s{std::vector<Index>(n, 2), random_state(Index{1} << n, rng)};
    const Vector via_circuit = oracle::apply_circuit(s, trotter_circuit(h, 0.7, 1)).amplitudes;
    EXPECT_LT((via_circuit - exact_unitary(h, 0.7) * s.amplitudes).norm(), 1e-10);
  }
}

TEST(ApplyCircuit, SizeGuards) {
  const oracle::DenseState big{std::vector<Index>(15, 2), Vector::Zero(Index{1} << 15)};
  EXPECT_THROW(oracle::apply_circuit(big, BrickworkCircuit{15, 2, {}}), Error);
  EXPECT_THROW(oracle::circuit_unitary(BrickworkCircuit{13, 2, {}}), Error);
}

TEST(Expectation, StateAndDensityForms) {
  Rng rng(94);
  const Vector v = random_state(8, rng);
  const std::vector<Index> dims{2, 2, 2};
  const oracle::SiteOps ops{{0, gates::pauli_x()}, {2, gates::pauli_z()}};
  const Complex direct = v.dot(kron_all(std::vector<Matrix>{gates::pauli_x(), Matrix::Identity(2, 2), gates::pauli_z()}) * v);
  EXPECT_NEAR(std::abs(oracle::expectation(oracle::DenseState{dims, v}, ops) - direct), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(oracle::expectation(projector(v), dims, ops) - direct), 0.0, 1e-12);
}

TEST(ScalarOracles, TrivialValues) {
  Rng rng(95);
  const Matrix h = random_hermitian(4, rng);
  EXPECT_NEAR(oracle::thermal_exact(Matrix::Identity(4, 4), h, 0.0), 4.0, 1e-12);
  for (Index d : {2, 3, 8}) EXPECT_NEAR(oracle::entropy_exact(Matrix::Identity(d, d) / double(d)), std::log(double(d)), 1e-12);
  const Vector phi = random_state(4, rng), psi = random_state(4, rng);
  EXPECT_NEAR(std::abs(oracle::amplitude_exact(phi, Matrix::Identity(4, 4), psi) - phi.dot(psi)), 0.0, 1e-15);
  EXPECT_THROW(oracle::amplitude_exact(phi, Matrix::Identity(3, 3), psi), Error);
}

TEST(ScalarOracles, ThermalEigenVersusTaylor) {
  Rng rng(96);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix h = random_hermitian(6, rng);
    const Matrix a = random_hermitian(6, rng);
    const double beta = 0.2 * (trial + 1);
    const double e = oracle::thermal_exact(a, h, beta);
    EXPECT_NEAR(e, oracle::thermal_taylor(a, h, beta), 1e-10 * std::max(1.0, std::abs(e)));
  }
}

TEST(BranchSimulate, SingleBellWire) {
  const Index d = 2;
  oracle::BranchPlan plan{{d, d}, Matrix::Identity(4, 4) / 4.0, {}};
  plan.steps.push_back(oracle::BranchStep::measure({0, 1}, bell_binary_measurement(d)));
  const auto br = oracle::channel_branch_simulate(plan);
  ASSERT_EQ(br.size(), 2u);
  EXPECT_NEAR(br[0].probability, 0.25, 1e-12);
  EXPECT_NEAR(br[1].probability, 0.75, 1e-12);
  EXPECT_EQ(br[0].outcomes, std::vector<int>{0});
  EXPECT_EQ(br[1].outcomes, std::vector<int>{1});
}

TEST(BranchSimulate, ApplyAndDiscardSteps) {
  Rng rng(97);
  const Matrix rho = random_density(4, rng);
  const Matrix u = random_unitary(2, rng);
  oracle::BranchPlan plan{{2, 2}, rho, {}};
  plan.steps.push_back(oracle::BranchStep::apply({1}, u));
  plan.steps.push_back(oracle::BranchStep::discard({0}));
  const auto br = oracle::channel_branch_simulate(plan);
  ASSERT_EQ(br.size(), 1u);
  const std::vector<Index> dims{2, 2};
  const std::vector<int> keep{1};
  const Matrix w = kron(Matrix::Identity(2, 2), u);
  EXPECT_LT((br[0].state - partial_trace(w * rho * w.adjoint(), dims, keep)).norm(), 1e-12);
  EXPECT_NEAR(std::abs(oracle::branch_expectation(br[0], {1}, gates::pauli_z()) - (br[0].state * gates::pauli_z()).trace()), 0.0, 1e-12);
}

TEST(BranchSimulate, CorrectedSumMatchesExactContraction) {
  // N = 6 preparation plan: two Bell joins, every branch weighted by the corrected estimator
  Rng rng(98);
  const auto psi = random_mps(6, 2, 2, rng);
  const SiteOperators ops{{1, gates::pauli_z()}, {4, gates::pauli_x()}};
  const auto plan = oqt_prepare_plan(psi);
  ASSERT_EQ(plan.joins.size(), 2u);
  const auto r = oqt_reconstruct(plan, ops);
  EXPECT_EQ(r.branches, 4u);
  const auto net = build_network(psi, BrickworkCircuit{6, 2, {}}, ops);
  EXPECT_NEAR(std::abs(r.value - evaluate_exact(net).value), 0.0, 1e-10);
}

TEST(BranchSimulate, BranchGuard) {
  oracle::BranchPlan plan{{2}, Matrix::Identity(2, 2) / 2.0, {}};
  const BinaryMeasurement m{projector(basis_vector(2, 0)), projector(basis_vector(2, 1))};
  for (int k = 0; k < 21; ++k) plan.steps.push_back(oracle::BranchStep::measure({0}, m));
  EXPECT_THROW(oracle::channel_branch_simulate(plan), Error);
}
