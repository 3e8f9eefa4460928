#pragma once

// Random instances (Haar unitaries, Ginibre matrices, random states) and the
// counter-based seed expansion used by every sampling estimator.

#include <random>

#include "epsim/tensor.hpp"

namespace epsim {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; maps (root, counter) to an independent 64-bit stream seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t counter) {
  std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Small counter-based generator for per-shot streams (cheap to construct).
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

inline Matrix random_ginibre(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = Complex(normal(rng), normal(rng)) / std::sqrt(2.0);
  return m;
}

inline Matrix random_unitary(Index d, Rng& rng) {
  const Matrix z = random_ginibre(d, d, rng);
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index k = 0; k < d; ++k) {
    const double mag = std::abs(r(k, k));
    if (mag > 0) q.col(k) *= r(k, k) / mag;
  }
  return q;
}

inline Matrix random_hermitian(Index d, Rng& rng) {
  const Matrix g = random_ginibre(d, d, rng);
  return 0.5 * (g + g.adjoint());
}

inline Vector random_state(Index d, Rng& rng) {
  Vector v = random_ginibre(d, 1, rng).col(0);
  return v / v.norm();
}

/// Random density matrix of the given rank (full rank when rank <= 0).
inline Matrix random_density(Index d, Rng& rng, Index rank = 0) {
  const Index r = rank <= 0 ? d : rank;
  const Matrix g = random_ginibre(d, r, rng);
  Matrix rho = g * g.adjoint();
  return rho / rho.trace().real();
}

/// Kraus list of a random channel d_in -> d_out with `count` operators (a random isometry
/// d_in -> d_out * count, split into blocks).
inline std::vector<Matrix> random_kraus(Index d_in, Index d_out, Index count, Rng& rng) {
  const Index big = d_out * count;
  Matrix iso;
  if (big >= d_in) {
    iso = random_unitary(big, rng).leftCols(d_in);
  } else {
    throw Error(ErrorKind::invalid_argument, "random_kraus: d_out * count must be at least d_in");
  }
  std::vector<Matrix> kraus;
  for (Index k = 0; k < count; ++k) {
    Matrix a(d_out, d_in);
    for (Index o = 0; o < d_out; ++o) a.row(o) = iso.row(o * count + k);
    kraus.push_back(a);
  }
  return kraus;
}

inline double uniform01(std::uint64_t seed) {
  return static_cast<double>(derive_seed(seed, 0) >> 11) * 0x1.0p-53;
}

}  // namespace epsim
