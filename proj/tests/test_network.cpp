#include <gtest/gtest.h>

#include "epsim/io.hpp"
#include "epsim/network.hpp"
#include "epsim/oracle.hpp"

using namespace epsim;

namespace {

Complex oracle_value(const MPS& psi, const BrickworkCircuit& c, const SiteOperators& ops) {
  const oracle::DenseState s{psi.phys_dims(), to_statevector(psi)};
  return oracle::expectation(oracle::apply_circuit(s, c), ops);
}

BrickworkCircuit single_gate(int n_sites, int site, const Matrix& u) { return {n_sites, 2, {{{site, u}}}}; }

// every two-site operator basis element |a><b| (x) |c><e|
std::vector<Matrix> operator_basis() {
  std::vector<Matrix> out;
  for (Index a = 0; a < 4; ++a)
    for (Index b = 0; b < 4; ++b) {
      Matrix e = Matrix::Zero(4, 4);
      e(a, b) = 1.0;
      out.push_back(e);
    }
  return out;
}

}  // namespace

TEST(CompileGate, IdentitySwapCnotRanks) {
  const auto id = compile_gate(Matrix::Identity(4, 4));
  EXPECT_EQ(id.bond_dim, 1);
  EXPECT_LT((recombine(id) - Matrix::Identity(4, 4)).norm(), 1e-12);
  const auto sw = compile_gate(gates::swap());
  EXPECT_EQ(sw.bond_dim, 4);
  const auto cx = compile_gate(gates::cnot());
  EXPECT_EQ(cx.bond_dim, 2);
  EXPECT_LT((recombine(cx) - gates::cnot()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CompileGate, RecombinationOnOperatorBasis) {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix u = random_unitary(trial % 2 ? 4 : 9, rng);
    const auto p = compile_gate(u);
    const Matrix r = recombine(p);
    EXPECT_LE(p.bond_dim, u.rows());
    if (u.rows() == 4)
      for (const auto& x : operator_basis()) EXPECT_LT((r * x * r.adjoint() - u * x * u.adjoint()).norm(), 1e-10);
    EXPECT_LT((r - u).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(CompileGate, RejectsNonUnitary) {
  EXPECT_THROW(compile_gate(2.0 * Matrix::Identity(4, 4)), Error);
  EXPECT_THROW(compile_gate(Matrix::Identity(3, 3)), Error);
}

TEST(BuildNetwork, EmptyCircuitMatchesExpectationProduct) {
  Rng rng(32);
  const auto psi = random_mps(4, 2, 3, rng);
  const BrickworkCircuit empty{4, 2, {}};
  const SiteOperators ops{{2, gates::pauli_z()}};
  const auto net = build_network(psi, empty, ops);
  EXPECT_EQ(net.count(WireKind::vertical), 0u);
  EXPECT_NEAR(std::abs(evaluate_exact(net).value - expectation_product(psi, ops)), 0.0, 1e-10);
}

TEST(BuildNetwork, CnotPreservesNorm) {
  const auto psi = product_mps({basis_vector(2, 0), basis_vector(2, 1)});
  const auto net = build_network(psi, single_gate(2, 0, gates::cnot()), {});
  EXPECT_NEAR(std::abs(evaluate_exact(net).value - 1.0), 0.0, 1e-12);
}

TEST(BuildNetwork, RequiresCanonicalAndMatchingGeometry) {
  Rng rng(33);
  MPS psi = random_mps(4, 2, 2, rng);
  EXPECT_THROW(build_network(psi, random_brickwork(5, 1, 2, rng), {}), Error);
  for (auto& a : psi.tensors[2]) a *= 1.5;
  EXPECT_THROW(build_network(psi, random_brickwork(4, 1, 2, rng), {}), Error);
}

TEST(EvaluateExact, RandomBrickworkMatchesOracle) {
  Rng rng(34);
  const auto psi = random_mps(4, 2, 4, rng);
  const auto c = random_brickwork(4, 2, 2, rng);
  const SiteOperators ops{{2, gates::pauli_z()}};
  EXPECT_NEAR(std::abs(evaluate_exact(build_network(psi, c, ops)).value - oracle_value(psi, c, ops)), 0.0, 1e-8);
}

TEST(EvaluateExact, FigureShapePauliPair) {
  Rng rng(35);
  const auto psi = random_mps(6, 2, 4, rng);
  const auto c = random_brickwork(6, 3, 2, rng);
  const SiteOperators ops{{1, gates::pauli_x()}, {3, gates::pauli_z()}};
  EXPECT_NEAR(std::abs(evaluate_exact(build_network(psi, c, ops)).value - oracle_value(psi, c, ops)), 0.0, 1e-8);
}

TEST(EvaluateExact, IdentityCircuitAndGaugeInvariance) {
  Rng rng(36);
  const auto psi = random_mps(4, 2, 4, rng);
  BrickworkCircuit idc{4, 2, {{{0, Matrix::Identity(4, 4)}, {2, Matrix::Identity(4, 4)}}}};
  EXPECT_NEAR(std::abs(evaluate_exact(build_network(psi, idc, {})).value - 1.0), 0.0, 1e-10);
  const auto c = random_brickwork(4, 2, 2, rng);
  const SiteOperators ops{{0, gates::pauli_y()}};
  const Complex v1 = evaluate_exact(build_network(psi, c, ops)).value;
  MPS regauged = psi;
  const Matrix g = random_unitary(regauged.bond_dim(2), rng);
  for (auto& a : regauged.tensors[1]) a = g * a;
  for (auto& a : regauged.tensors[2]) a = a * g.adjoint();
  ASSERT_TRUE(is_left_canonical(regauged));
  EXPECT_NEAR(std::abs(evaluate_exact(build_network(regauged, c, ops)).value - v1), 0.0, 1e-10);
}

TEST(EvaluateExact, RandomizedSuite) {
  Rng rng(37);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 5, layers = trial % 4;
    const auto psi = random_mps(n, 2, 1 + trial % 4, rng);
    const auto c = random_brickwork(n, layers, 2, rng);
    const SiteOperators ops{{trial % n, random_hermitian(2, rng)}};
    EXPECT_NEAR(std::abs(evaluate_exact(build_network(psi, c, ops)).value - oracle_value(psi, c, ops)), 0.0, 1e-8)
        << "N=" << n << " L=" << layers;
  }
}

TEST(EvaluateExact, SizeGuardRefuses) {
  Rng rng(38);
  const auto psi = random_mps(6, 2, 8, rng);
  const auto net = build_network(psi, random_brickwork(6, 3, 2, rng), {{0, gates::pauli_z()}});
  EXPECT_THROW(evaluate_exact(net, 16), Error);
}

TEST(EvaluateRegions, PartitionInvariance) {
  Rng rng(39);
  const auto psi = random_mps(6, 2, 4, rng);
  const auto c = random_brickwork(6, 3, 2, rng);
  const auto net = build_network(psi, c, {{1, gates::pauli_z()}, {4, gates::pauli_x()}});
  const Complex exact = evaluate_exact(net).value;
  for (const auto& p : {whole_partition(net), singleton_partition(net), site_split(net, 3), layer_partition(net)}) {
    const auto r = evaluate_regions(net, p);
    EXPECT_NEAR(std::abs(r.value - exact), 0.0, 1e-10);
    EXPECT_EQ(r.region_probs.size(), p.regions.size());
  }
}

TEST(EvaluateRegions, RejectsInvalidPartition) {
  Rng rng(40);
  const auto net = build_network(random_mps(3, 2, 2, rng), random_brickwork(3, 1, 2, rng), {});
  auto p = singleton_partition(net);
  p.regions.pop_back();
  EXPECT_THROW(evaluate_regions(net, p), Error);
  auto q = singleton_partition(net);
  q.regions.push_back(q.regions.front());
  EXPECT_THROW(evaluate_regions(net, q), Error);
}

TEST(EvaluateSampled, DeterministicNetwork) {
  Rng rng(41);
  const auto psi = random_mps(3, 2, 2, rng);
  const auto net = build_network(psi, BrickworkCircuit{3, 2, {}}, {{1, gates::pauli_z()}});
  const auto est = evaluate_sampled(net, 100, 7);
  EXPECT_NEAR(est.estimate, evaluate_exact(net).value.real(), 1e-10);
  EXPECT_NEAR(est.stderr_, 0.0, 1e-12);
}

TEST(EvaluateSampled, SingleGateWithinThreeSigma) {
  Rng rng(42);
  const auto psi = random_mps(2, 2, 2, rng);
  const auto net = build_network(psi, single_gate(2, 0, random_unitary(4, rng)), {{0, gates::pauli_z()}});
  const double exact = evaluate_exact(net).value.real();
  for (auto strategy : {SamplingStrategy::postselect, SamplingStrategy::corrected}) {
    const auto est = evaluate_sampled(net, 100000, 2024, strategy);
    EXPECT_LT(std::abs(est.estimate - exact), 3.0 * est.stderr_);
  }
}

TEST(EvaluateSampled, AcceptanceRateMatchesWireCount) {
  Rng rng(43);
  const auto psi = random_mps(2, 2, 2, rng);
  const auto net = build_network(psi, single_gate(2, 0, random_unitary(4, rng)), {{1, gates::pauli_x()}});
  const auto est = evaluate_sampled(net, 20000, 5);
  const double w = static_cast<double>(net.count(WireKind::vertical));
  const double p = std::pow(1.0 / 4.0, w);
  EXPECT_NEAR(est.acceptance_probability, p, 1e-12);
  const double rate = static_cast<double>(est.accepted) / static_cast<double>(est.shots);
  EXPECT_LT(std::abs(rate - p), 4.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(est.shots)));
}

TEST(EvaluateSampled, ReproducibleAndUnbiasedOverSeeds) {
  Rng rng(44);
  const auto psi = random_mps(2, 2, 2, rng);
  const auto net = build_network(psi, single_gate(2, 0, random_unitary(4, rng)), {{0, random_hermitian(2, rng)}});
  const double exact = evaluate_exact(net).value.real();
  EXPECT_EQ(evaluate_sampled(net, 1000, 9).estimate, evaluate_sampled(net, 1000, 9).estimate);
  double mean = 0.0, sigma = 0.0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    const auto est = evaluate_sampled(net, 4000, 100 + s);
    mean += est.estimate / seeds;
    sigma += est.stderr_ / seeds;
  }
  EXPECT_LT(std::abs(mean - exact), 4.0 * sigma / std::sqrt(static_cast<double>(seeds)));
  EXPECT_THROW(evaluate_sampled(net, 0, 1), Error);
}

TEST(OqtPlan, ProductStateHasTrivialJoins) {
  const auto psi = product_mps(std::vector<Vector>(4, basis_vector(2, 0)));
  const auto plan = oqt_prepare_plan(psi);
  EXPECT_EQ(plan.segments.size(), 2u);
  for (const auto& j : plan.joins) EXPECT_EQ(j.dim, 1);
}

TEST(OqtPlan, RandomStateReconstruction) {
  Rng rng(45);
  const auto psi = random_mps(4, 2, 2, rng);
  const auto plan = oqt_prepare_plan(psi);
  ASSERT_FALSE(plan.joins.empty());
  const SiteOperators ops{{1, gates::pauli_z()}};
  const auto r = oqt_reconstruct(plan, ops);
  EXPECT_NEAR(std::abs(r.value - expectation_product(psi, ops)), 0.0, 1e-8);
}

TEST(OqtPlan, PostselectedBranchIsTheState) {
  Rng rng(46);
  const auto psi = random_mps(4, 2, 2, rng);
  const auto plan = oqt_prepare_plan(psi);
  const Matrix rho = oqt_postselected_state(plan);
  const Vector v = to_statevector(psi);
  EXPECT_LT((rho - projector(v / v.norm())).norm(), 1e-10);
}

TEST(OqtPlan, OddSiteCountIsPadded) {
  Rng rng(47);
  const auto psi = random_mps(3, 2, 2, rng);
  const auto plan = oqt_prepare_plan(psi);
  EXPECT_TRUE(plan.padded);
}

TEST(Resources, QuotedFormulas) {
  Rng rng(48);
  const auto r63 = resources(random_brickwork(6, 3, 2, rng));
  EXPECT_EQ(r63.total_gates, 9u);
  EXPECT_EQ(r63.evolution_qudits, 54u);
  EXPECT_EQ(r63.state_qudits, 3u);
  EXPECT_EQ(r63.sample_cost_order, "O(N^2 M L)");
  const auto r0 = resources(BrickworkCircuit{6, 2, {}});
  EXPECT_EQ(r0.total_gates, 0u);
  EXPECT_EQ(r0.evolution_qudits, 0u);
  const auto r21 = resources(random_brickwork(2, 1, 2, rng));
  EXPECT_EQ(r21.total_gates, 1u);
  EXPECT_EQ(r21.evolution_qudits, 6u);
}

TEST(Serialization, NetworkAndCircuitJson) {
  Rng rng(49);
  const auto c = random_brickwork(3, 2, 2, rng);
  const auto j = io::to_json(c);
  EXPECT_EQ(j["schema_version"], 1);
  const auto back = io::circuit_from(j);
  EXPECT_LT((oracle::circuit_unitary(back) - oracle::circuit_unitary(c)).norm(), 1e-14);
  const auto net = build_network(random_mps(3, 2, 2, rng), c, {{0, gates::pauli_z()}});
  const auto jn = io::to_json(net);
  EXPECT_EQ(jn["schema_version"], 1);
  EXPECT_EQ(jn["nodes"].size(), net.nodes.size());
  EXPECT_EQ(jn["wires"].size(), net.wires.size());
}
