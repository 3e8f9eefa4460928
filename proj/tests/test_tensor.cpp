#include <gtest/gtest.h>

#include "epsim/random.hpp"
#include "epsim/tensor.hpp"

using namespace epsim;

TEST(Svd, IdentityHasUnitSingularValues) {
  const auto r = svd(Matrix::Identity(2, 2));
  EXPECT_NEAR(r.s(0), 1.0, 1e-14);
  EXPECT_NEAR(r.s(1), 1.0, 1e-14);
}

TEST(Svd, RankOneOuterProduct) {
  Rng rng(1);
  const Vector a = random_state(2, rng), b = random_state(2, rng);
  const auto r = svd(a * b.adjoint());
  EXPECT_NEAR(r.s(0), 1.0, 1e-12);
  EXPECT_NEAR(r.s(1), 0.0, 1e-12);
}

TEST(Svd, ReconstructsRandomMatricesUpTo64) {
  Rng rng(2);
  for (Index n : {1, 3, 4, 17, 64}) {
    const Matrix m = random_ginibre(n, n + 3, rng);
    const auto r = svd(m);
    for (Index k = 1; k < r.s.size(); ++k) EXPECT_GE(r.s(k - 1), r.s(k));
    const Matrix back = r.u * r.s.cast<Complex>().asDiagonal() * r.v.adjoint();
    EXPECT_LT((back - m).norm(), 1e-12 * std::max(1.0, operator_norm(m)) * std::sqrt(double(m.size())));
  }
}

TEST(PsdSqrt, IdentityAndDiagonal) {
  EXPECT_LT((psd_sqrt(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm(), 1e-14);
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 4.0;
  d(1, 1) = 9.0;
  const Matrix r = psd_sqrt(d);
  EXPECT_NEAR(r(0, 0).real(), 2.0, 1e-12);
  EXPECT_NEAR(r(1, 1).real(), 3.0, 1e-12);
}

TEST(PsdSqrt, SquaresBackOnRandomPsd) {
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const Matrix x = random_ginibre(5, 5, rng);
    const Matrix m = x.adjoint() * x;
    const Matrix r = psd_sqrt(m);
    EXPECT_TRUE(is_hermitian(r));
    EXPECT_LT((r * r - m).norm(), 1e-10);
  }
}

TEST(PsdSqrt, ClampsTinyNegativeAndRejectsLarge) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = -1e-12;
  EXPECT_NO_THROW(psd_sqrt(m));
  m(1, 1) = -1e-3;
  try {
    psd_sqrt(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::not_psd);
  }
}

TEST(MatrixExp, ZeroAndPauliZ) {
  EXPECT_LT((matrix_exp(Matrix::Zero(3, 3), 1.0) - Matrix::Identity(3, 3)).norm(), 1e-14);
  Matrix z = Matrix::Zero(2, 2);
  z(0, 0) = 1.0;
  z(1, 1) = -1.0;
  const Matrix u = matrix_exp(z, Complex(0.0, -M_PI / 2));
  EXPECT_LT(std::abs(u(0, 0) - Complex(0, -1)), 1e-12);
  EXPECT_LT(std::abs(u(1, 1) - Complex(0, 1)), 1e-12);
}

TEST(MatrixExp, AntiHermitianArgumentIsUnitary) {
  Rng rng(4);
  for (int k = 0; k < 10; ++k) {
    const Matrix u = matrix_exp(random_hermitian(4, rng), Complex(0.0, -0.3));
    EXPECT_LT(unitarity_defect(u), 1e-12);
  }
}

TEST(MatrixExp, NonHermitianMatchesSeries) {
  Rng rng(5);
  const Matrix m = 0.3 * random_ginibre(3, 3, rng);
  Matrix series = Matrix::Identity(3, 3), term = Matrix::Identity(3, 3);
  for (int n = 1; n < 40; ++n) {
    term = term * m / double(n);
    series += term;
  }
  EXPECT_LT((matrix_exp(m, 1.0) - series).norm(), 1e-12);
}

TEST(Vectorize, ConventionFixingExamples) {
  const auto a = vectorize(projector(basis_vector(2, 0)));
  EXPECT_EQ(a.entries, (Vector(4) << 1, 0, 0, 0).finished());
  const Matrix m01 = basis_vector(2, 0) * basis_vector(2, 1).adjoint();
  EXPECT_EQ(vectorize(m01).entries, (Vector(4) << 0, 1, 0, 0).finished());
}

TEST(Vectorize, RoundTripIsExact) {
  Rng rng(6);
  const Matrix m = random_ginibre(3, 3, rng);
  const Matrix back = devectorize(vectorize(m));
  EXPECT_EQ((back - m).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Vectorize, RejectsNonSquare) {
  EXPECT_THROW(vectorize(Matrix::Zero(2, 3)), Error);
  EXPECT_THROW(devectorize(Vector::Zero(5)), Error);
}

TEST(Kron, LeftFactorIsMajor) {
  const Vector v = kron(basis_vector(2, 1), basis_vector(3, 2));
  EXPECT_EQ(v(1 * 3 + 2), Complex(1.0));
}

TEST(PartialTrace, ProductStateMarginals) {
  Rng rng(7);
  const Matrix a = random_density(2, rng), b = random_density(3, rng);
  const std::vector<Index> dims{2, 3};
  const std::vector<int> keep_a{0}, keep_b{1};
  EXPECT_LT((partial_trace(kron(a, b), dims, keep_a) - a).norm(), 1e-12);
  EXPECT_LT((partial_trace(kron(a, b), dims, keep_b) - b).norm(), 1e-12);
}

TEST(Embed, MatchesKronOnAdjacentSites) {
  Rng rng(8);
  const Matrix op = random_ginibre(4, 4, rng);
  const std::vector<Index> dims{2, 2, 2};
  const std::vector<int> sites{1, 2};
  EXPECT_LT((embed(op, sites, dims) - kron(Matrix::Identity(2, 2), op)).norm(), 1e-12);
}

TEST(Eigh, AscendingWithFixedPhases) {
  Rng rng(9);
  const Matrix h = random_hermitian(4, rng);
  const auto e = eigh(h);
  for (Index k = 1; k < 4; ++k) EXPECT_LE(e.values(k - 1), e.values(k));
  EXPECT_LT((e.vectors * e.values.cast<Complex>().asDiagonal() * e.vectors.adjoint() - h).norm(), 1e-10);
}

TEST(Predicates, AreDeterministic) {
  Rng rng(10);
  const Matrix u = random_unitary(3, rng);
  EXPECT_TRUE(is_unitary(u));
  EXPECT_FALSE(is_hermitian(u));
  EXPECT_TRUE(is_density_matrix(random_density(3, rng)));
  EXPECT_FALSE(is_psd(-Matrix::Identity(2, 2)));
}
