#pragma once

// Quantum channels in Kraus form and the channel-state duality.
//
// Choi states are stored with the output factor first and the input reference second:
//   omega_Phi = (1/d_in) sum_ij Phi(|i><j|) (x) |i><j|,
// which is trace one. The readout identity is
//   Phi(rho) = d_in * tr_in[ omega_Phi (1 (x) rho^T) ].

#include <array>
#include <optional>

#include "epsim/tensor.hpp"

namespace epsim {

class Channel {
 public:
  Channel(std::vector<Matrix> kraus, double tol = Tolerance::equality) : kraus_(std::move(kraus)) {
    if (kraus_.empty()) throw Error(ErrorKind::invalid_channel, "a channel needs at least one Kraus operator");
    in_dim_ = kraus_.front().cols();
    out_dim_ = kraus_.front().rows();
    Matrix gram = Matrix::Zero(in_dim_, in_dim_);
    for (const auto& a : kraus_) {
      if (a.rows() != out_dim_ || a.cols() != in_dim_)
        throw Error(ErrorKind::dimension_mismatch, "Kraus operators must share one shape");
      gram += a.adjoint() * a;
    }
    const double defect = (gram - Matrix::Identity(in_dim_, in_dim_)).cwiseAbs().maxCoeff();
    if (defect > tol)
      throw Error(ErrorKind::invalid_channel, detail::cat("trace preservation violated by ", defect));
  }

  Index in_dim() const { return in_dim_; }
  Index out_dim() const { return out_dim_; }
  const std::vector<Matrix>& kraus() const { return kraus_; }
  std::size_t kraus_count() const { return kraus_.size(); }

 private:
  std::vector<Matrix> kraus_;
  Index in_dim_ = 0;
  Index out_dim_ = 0;
};

inline Channel identity_channel(Index d) { return Channel({Matrix::Identity(d, d)}); }

inline Channel unitary_channel(const Matrix& u) {
  if (!is_unitary(u)) throw Error(ErrorKind::not_unitary, "unitary_channel needs a unitary");
  return Channel({u});
}

/// Phi_second o Phi_first.
inline Channel compose(const Channel& second, const Channel& first) {
  if (second.in_dim() != first.out_dim())
    throw Error(ErrorKind::dimension_mismatch, "compose: output of first must feed input of second");
  std::vector<Matrix> kraus;
  for (const auto& b : second.kraus())
    for (const auto& a : first.kraus()) kraus.push_back(b * a);
  return Channel(std::move(kraus));
}

/// sum_i A_i X A_i^dagger for an arbitrary operator X (no density-matrix check).
inline Matrix apply_linear(const Channel& ch, const Matrix& x) {
  if (x.rows() != ch.in_dim() || x.cols() != ch.in_dim())
    throw Error(ErrorKind::dimension_mismatch,
                detail::cat("channel input dim ", ch.in_dim(), " vs operator ", x.rows(), "x", x.cols()));
  Matrix out = Matrix::Zero(ch.out_dim(), ch.out_dim());
  for (const auto& a : ch.kraus()) out += a * x * a.adjoint();
  return out;
}

inline Matrix apply(const Channel& ch, const Matrix& rho, double tol = Tolerance::equality) {
  if (rho.rows() != ch.in_dim() || rho.cols() != ch.in_dim())
    throw Error(ErrorKind::dimension_mismatch,
                detail::cat("channel input dim ", ch.in_dim(), " vs state ", rho.rows(), "x", rho.cols()));
  if (!is_density_matrix(rho, tol)) throw Error(ErrorKind::invalid_state, "apply expects a density matrix");
  return apply_linear(ch, rho);
}

// ---------------------------------------------------------------------------
// Choi states

struct ChoiState {
  Index in_dim = 0;
  Index out_dim = 0;
  Matrix matrix;  // (out_dim * in_dim) square, output factor major
};

/// Reduced state on the input reference factor.
inline Matrix input_marginal(const ChoiState& w) {
  const std::array<Index, 2> dims{w.out_dim, w.in_dim};
  const std::array<int, 1> keep{1};
  return partial_trace(w.matrix, dims, keep);
}

inline void validate(const ChoiState& w, double tol = Tolerance::equality) {
  const Index n = w.in_dim * w.out_dim;
  if (w.matrix.rows() != n || w.matrix.cols() != n)
    throw Error(ErrorKind::dimension_mismatch, "Choi matrix does not match its declared dims");
  if (!is_psd(w.matrix, tol)) throw Error(ErrorKind::invalid_choi, "Choi matrix is not Hermitian PSD");
  if (std::abs(w.matrix.trace() - 1.0) > tol) throw Error(ErrorKind::invalid_choi, "Choi matrix trace is not 1");
  const Matrix marg = input_marginal(w);
  const Matrix target = Matrix::Identity(w.in_dim, w.in_dim) / static_cast<double>(w.in_dim);
  const double defect = (marg - target).cwiseAbs().maxCoeff();
  if (defect > tol)
    throw Error(ErrorKind::invalid_choi, detail::cat("input marginal differs from 1/d by ", defect));
}

/// |A>> with entries A(a, i) at index a * d_in + i.
inline Vector vec_operator(const Matrix& a) {
  Vector v(a.size());
  for (Index r = 0; r < a.rows(); ++r)
    for (Index c = 0; c < a.cols(); ++c) v(r * a.cols() + c) = a(r, c);
  return v;
}

inline Matrix unvec_operator(const Vector& v, Index rows, Index cols) {
  Matrix a(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) a(r, c) = v(r * cols + c);
  return a;
}

inline ChoiState to_choi(const Channel& ch) {
  const Index n = ch.in_dim() * ch.out_dim();
  ChoiState w{ch.in_dim(), ch.out_dim(), Matrix::Zero(n, n)};
  for (const auto& a : ch.kraus()) {
    const Vector v = vec_operator(a);
    w.matrix += v * v.adjoint();
  }
  w.matrix /= static_cast<double>(ch.in_dim());
  return w;
}

/// Minimal Kraus set from the Choi eigendecomposition; eigenvalues below `drop` are discarded.
inline Channel from_choi(const ChoiState& w, double drop = 1e-12, double tol = Tolerance::equality) {
  validate(w, tol);
  const auto eig = eigh(w.matrix, tol);
  std::vector<Matrix> kraus;
  for (Index k = eig.values.size(); k-- > 0;) {
    const double lambda = eig.values(k);
    if (lambda < drop) continue;
    kraus.push_back(std::sqrt(static_cast<double>(w.in_dim) * lambda) *
                    unvec_operator(eig.vectors.col(k), w.out_dim, w.in_dim));
  }
  return Channel(std::move(kraus), std::max(tol, 1e-9));
}

/// Readout identity on an arbitrary operator x.
inline Matrix choi_apply_linear(const ChoiState& w, const Matrix& x) {
  if (x.rows() != w.in_dim || x.cols() != w.in_dim)
    throw Error(ErrorKind::dimension_mismatch, "choi_apply: operator does not match the input dim");
  const Index d1 = w.in_dim, d2 = w.out_dim;
  // d * tr_in[omega (1 (x) x^T)]: entry (a, b) = d * sum_{i,j} omega[(a,i),(b,j)] x^T(j,i)
  Matrix out = Matrix::Zero(d2, d2);
  for (Index a = 0; a < d2; ++a)
    for (Index b = 0; b < d2; ++b) {
      Complex acc{};
      for (Index i = 0; i < d1; ++i)
        for (Index j = 0; j < d1; ++j) acc += w.matrix(a * d1 + i, b * d1 + j) * x(i, j);
      out(a, b) = static_cast<double>(d1) * acc;
    }
  return out;
}

inline Matrix choi_apply(const ChoiState& w, const Matrix& rho, double tol = Tolerance::equality) {
  if (rho.rows() != w.in_dim || rho.cols() != w.in_dim)
    throw Error(ErrorKind::dimension_mismatch, "choi_apply: state does not match the input dim");
  if (!is_density_matrix(rho, tol)) throw Error(ErrorKind::invalid_state, "choi_apply expects a density matrix");
  return choi_apply_linear(w, rho);
}

// ---------------------------------------------------------------------------
// Binary measurements

struct BinaryMeasurement {
  Matrix m0;
  Matrix m1;
};

inline double completeness_defect(const BinaryMeasurement& m) {
  const Matrix sum = m.m0.adjoint() * m.m0 + m.m1.adjoint() * m.m1;
  return (sum - Matrix::Identity(sum.rows(), sum.cols())).cwiseAbs().maxCoeff();
}

inline std::pair<double, double> outcome_probabilities(const BinaryMeasurement& m, const Matrix& rho) {
  return {(m.m0 * rho * m.m0.adjoint()).trace().real(), (m.m1 * rho * m.m1.adjoint()).trace().real()};
}

/// {sqrt(rho^T), sqrt(1 - rho^T)}: the measurement that reads a Choi state out on input rho.
inline BinaryMeasurement state_measurement(const Matrix& rho, double tol = Tolerance::equality) {
  require_square(rho, "state_measurement input");
  if (!is_density_matrix(rho, tol)) throw Error(ErrorKind::invalid_state, "state_measurement expects a density matrix");
  const Matrix t = rho.transpose();
  const Matrix one = Matrix::Identity(rho.rows(), rho.cols());
  return {psd_sqrt(t), psd_sqrt(one - t)};
}

// Offset bookkeeping for the state measurement applied to a Choi state omega_Phi.
// Measuring {M0, M1} on the input reference leaves the (unnormalized) output
//   branch 0:  Phi(rho) / d
//   branch 1:  (Phi(1) - Phi(rho)) / d
// so with p_b the branch probabilities and e_b the conditional means of an observable A,
//   tr(A Phi(rho)) = d p0 e0 = tr(A Phi(1)) - d p1 e1.
// The reconstruction averages both routes, so every shot contributes.

/// Combined estimate from branch statistics; `offset` is tr(A Phi(1)).
inline double reconstruct_from_branches(double p0, double mean0, double p1, double mean1, double offset, Index d) {
  const double dd = static_cast<double>(d);
  return 0.5 * (dd * p0 * mean0 + offset - dd * p1 * mean1);
}

/// Single-shot unbiased estimator: `value` is the observed eigenvalue of A on the output,
/// `p1` the (state-independent) probability of outcome 1, which is (d - 1) / d.
inline double heralded_shot_value(int outcome, double value, double offset, Index d) {
  const double dd = static_cast<double>(d);
  const double p1 = (dd - 1.0) / dd;
  if (outcome == 0) return 0.5 * dd * value;
  return 0.5 * (offset / p1 - dd * value);
}

/// {|omega><omega|, 1 - |omega><omega|} on d^2 dims.
inline BinaryMeasurement bell_binary_measurement(Index d) {
  if (d < 1) throw Error(ErrorKind::invalid_argument, "bell_binary_measurement needs d >= 1");
  const Matrix p = projector(bell_vector(d));
  return {p, Matrix::Identity(d * d, d * d) - p};
}

// ---------------------------------------------------------------------------
// Dilations

struct Dilation {
  Matrix unitary;               // on (input (x) input ancilla) -> (output (x) ancilla)
  Index input_ancilla_dim = 1;  // ancilla prepared in |0>
  Index ancilla_dim = 1;        // traced out after the unitary
};

/// Stinespring unitary: columns |i>|0> carry the isometry sum_k A_k|i> (x) |k>, the rest is
/// an orthonormal completion.
inline Dilation stinespring(const Channel& ch) {
  const Index d1 = ch.in_dim(), d2 = ch.out_dim();
  const Index k = static_cast<Index>(ch.kraus_count());
  const Index l = std::lcm(d1, d2);
  Index total = l;
  while (total < d2 * k) total += l;
  const Index anc_in = total / d1, anc_out = total / d2;

  Matrix iso = Matrix::Zero(total, d1);
  for (Index kk = 0; kk < k; ++kk)
    for (Index o = 0; o < d2; ++o)
      for (Index i = 0; i < d1; ++i) iso(o * anc_out + kk, i) = ch.kraus()[kk](o, i);

  Dilation out{Matrix::Zero(total, total), anc_in, anc_out};
  Eigen::HouseholderQR<Matrix> qr(iso);
  const Matrix q = qr.householderQ();
  Index next = d1;
  for (Index col = 0; col < total; ++col) {
    if (col % anc_in == 0) {
      out.unitary.col(col) = iso.col(col / anc_in);
    } else {
      out.unitary.col(col) = q.col(next++);
    }
  }
  return out;
}

/// tr_anc(U (rho (x) |0><0|) U^dagger).
inline Matrix dilation_apply(const Dilation& dil, const Matrix& rho) {
  Matrix anc0 = Matrix::Zero(dil.input_ancilla_dim, dil.input_ancilla_dim);
  anc0(0, 0) = 1.0;
  const Matrix big = dil.unitary * kron(rho, anc0) * dil.unitary.adjoint();
  const Index d2 = dil.unitary.rows() / dil.ancilla_dim;
  const std::array<Index, 2> dims{d2, dil.ancilla_dim};
  const std::array<int, 1> keep{0};
  return partial_trace(big, dims, keep);
}

struct PurifiedChoiState {
  Index out_dim = 0;
  Index ancilla_dim = 0;
  Index in_dim = 0;
  Vector vector;  // output (x) ancilla (x) input reference
};

inline PurifiedChoiState purified_choi(const Channel& ch) {
  const Index d1 = ch.in_dim(), d2 = ch.out_dim();
  const Index k = static_cast<Index>(ch.kraus_count());
  PurifiedChoiState p{d2, k, d1, Vector::Zero(d2 * k * d1)};
  const double norm = 1.0 / std::sqrt(static_cast<double>(d1));
  for (Index kk = 0; kk < k; ++kk)
    for (Index o = 0; o < d2; ++o)
      for (Index i = 0; i < d1; ++i) p.vector((o * k + kk) * d1 + i) = norm * ch.kraus()[kk](o, i);
  return p;
}

inline ChoiState reduce_ancilla(const PurifiedChoiState& p) {
  const std::array<Index, 3> dims{p.out_dim, p.ancilla_dim, p.in_dim};
  const std::array<int, 2> keep{0, 2};
  return {p.in_dim, p.out_dim, partial_trace(projector(p.vector), dims, keep)};
}

// ---------------------------------------------------------------------------
// Transfer operators

struct TransferOperator {
  Index in_dim = 0;
  Index out_dim = 0;
  Matrix matrix;  // out_dim^2 x in_dim^2, acts on vectorize(rho)
};

/// sum_i A_i (x) conj(A_i).
inline TransferOperator transfer(const Channel& ch) {
  const Index d1 = ch.in_dim(), d2 = ch.out_dim();
  TransferOperator t{d1, d2, Matrix::Zero(d2 * d2, d1 * d1)};
  for (const auto& a : ch.kraus()) t.matrix += kron(a, Matrix(a.conjugate()));
  return t;
}

/// sum_ij <j|O|i> A_i (x) conj(A_j); equals transfer() for O = 1. With the ket copy on the
/// left Kronecker factor this is the ordering for which
///   <psi|O|psi> contributions read  Tr(M_O (B (x) B*)).
inline TransferOperator transfer_obs(const std::vector<Matrix>& kraus, const Matrix& o) {
  const Index n = static_cast<Index>(kraus.size());
  if (o.rows() != n || o.cols() != n)
    throw Error(ErrorKind::dimension_mismatch,
                detail::cat("observable is ", o.rows(), "x", o.cols(), " but there are ", n, " Kraus operators"));
  const Index d1 = kraus.front().cols(), d2 = kraus.front().rows();
  TransferOperator t{d1, d2, Matrix::Zero(d2 * d2, d1 * d1)};
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const Complex w = o(j, i);
      if (w != Complex{}) t.matrix += w * kron(kraus[i], Matrix(kraus[j].conjugate()));
    }
  return t;
}

inline TransferOperator transfer_obs(const Channel& ch, const Matrix& o) { return transfer_obs(ch.kraus(), o); }

// ---------------------------------------------------------------------------
// Special channels

/// Weyl operators X^a Z^b / d; a Kraus set of the completely depolarizing channel.
inline Channel depolarizing(Index d) {
  if (d < 2) throw Error(ErrorKind::invalid_argument, "depolarizing channel needs d >= 2");
  std::vector<Matrix> kraus;
  const double pi = std::acos(-1.0);
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b < d; ++b) {
      Matrix w = Matrix::Zero(d, d);
      for (Index j = 0; j < d; ++j)
        w((j + a) % d, j) = std::polar(1.0 / static_cast<double>(d), 2.0 * pi * static_cast<double>(b * j) / static_cast<double>(d));
      kraus.push_back(w);
    }
  return Channel(std::move(kraus));
}

/// The map left by the failed outcome of a Bell binary measurement used as a connection:
///   P(rho) = d^2/(d^2-1) Delta(rho) - 1/(d^2-1) rho.
/// Stored by its Choi matrix (1 - |omega><omega|)/(d^2 - 1).
struct OqtMap {
  Index d = 0;
  ChoiState choi;

  Matrix apply(const Matrix& rho) const { return choi_apply_linear(choi, rho); }

  /// Direct evaluation of the defining formula.
  Matrix formula(const Matrix& rho) const {
    const double dd = static_cast<double>(d * d);
    const Matrix delta = rho.trace() * Matrix::Identity(d, d) / static_cast<double>(d);
    return dd / (dd - 1.0) * delta - rho / (dd - 1.0);
  }

  Channel channel() const { return from_choi(choi); }
};

inline OqtMap oqt_channel(Index d) {
  if (d < 2) throw Error(ErrorKind::invalid_argument, "oqt_channel needs d >= 2");
  const double dd = static_cast<double>(d * d);
  const Matrix choi = (Matrix::Identity(d * d, d * d) - projector(bell_vector(d))) / (dd - 1.0);
  return {d, ChoiState{d, d, choi}};
}

}  // namespace epsim
