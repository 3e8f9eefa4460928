#pragma once

// Dense complex linear algebra shared by every epsim module.
//
// Conventions fixed here and relied on everywhere else:
//  * Kronecker products put the left factor on the major (slow) index.
//  * Multi-site vectors are indexed |i_1 i_2 ... i_N> with i_1 major.
//  * vectorize(rho)[i * d + j] = rho(i, j), so for any A
//      vectorize(A rho A^dagger) = kron(A, conj(A)) * vectorize(rho).

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace epsim {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr Complex kI{0.0, 1.0};

enum class ErrorKind {
  dimension_mismatch,
  numerical,
  not_psd,
  not_unitary,
  not_hermitian,
  invalid_channel,
  invalid_choi,
  invalid_state,
  not_canonical,
  size_guard,
  invalid_argument,
  ill_conditioned,
  budget_infeasible,
  sampling_failure,
  not_eigenvector,
  degenerate_reference,
  invalid_partition,
  parse,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::not_psd: return "not_psd";
    case ErrorKind::not_unitary: return "not_unitary";
    case ErrorKind::not_hermitian: return "not_hermitian";
    case ErrorKind::invalid_channel: return "invalid_channel";
    case ErrorKind::invalid_choi: return "invalid_choi";
    case ErrorKind::invalid_state: return "invalid_state";
    case ErrorKind::not_canonical: return "not_canonical";
    case ErrorKind::size_guard: return "size_guard";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::ill_conditioned: return "ill_conditioned";
    case ErrorKind::budget_infeasible: return "budget_infeasible";
    case ErrorKind::sampling_failure: return "sampling_failure";
    case ErrorKind::not_eigenvector: return "not_eigenvector";
    case ErrorKind::degenerate_reference: return "degenerate_reference";
    case ErrorKind::invalid_partition: return "invalid_partition";
    case ErrorKind::parse: return "parse";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

namespace detail {
template <typename... Parts>
std::string cat(const Parts&... parts) {
  std::ostringstream os;
  os.precision(17);
  (os << ... << parts);
  return os.str();
}
}  // namespace detail

/// Default tolerances. Every check that uses one also takes an override.
struct Tolerance {
  static constexpr double equality = 1e-10;
  static constexpr double psd_clamp = 1e-10;
  static constexpr double unitarity = 1e-8;
};

// ---------------------------------------------------------------------------
// Predicates

inline double frobenius(const Matrix& m) { return m.norm(); }

inline double operator_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

inline bool is_square(const Matrix& m) { return m.rows() == m.cols(); }

inline bool is_hermitian(const Matrix& m, double tol = Tolerance::equality) {
  return is_square(m) && (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

inline bool is_unitary(const Matrix& m, double tol = Tolerance::unitarity) {
  if (!is_square(m)) return false;
  const Matrix defect = m.adjoint() * m - Matrix::Identity(m.rows(), m.cols());
  return defect.cwiseAbs().maxCoeff() <= tol;
}

inline double unitarity_defect(const Matrix& m) {
  return (m.adjoint() * m - Matrix::Identity(m.cols(), m.cols())).norm();
}

inline bool is_psd(const Matrix& m, double tol = Tolerance::psd_clamp) {
  if (!is_hermitian(m, std::max(tol, Tolerance::equality))) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol;
}

inline bool is_density_matrix(const Matrix& m, double tol = Tolerance::equality) {
  return is_psd(m, tol) && std::abs(m.trace() - 1.0) <= tol;
}

inline void require_square(const Matrix& m, const char* what) {
  if (!is_square(m))
    throw Error(ErrorKind::dimension_mismatch,
                detail::cat(what, " must be square, got ", m.rows(), "x", m.cols()));
}

// ---------------------------------------------------------------------------
// Kronecker products

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out = Eigen::kroneckerProduct(a, b).eval();
  return out;
}

inline Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

inline Matrix kron_all(std::span<const Matrix> factors) {
  Matrix out = Matrix::Identity(1, 1);
  for (const auto& f : factors) out = kron(out, f);
  return out;
}

inline Index product(std::span<const Index> dims) {
  return std::accumulate(dims.begin(), dims.end(), Index{1}, std::multiplies<>());
}

inline Vector basis_vector(Index dim, Index k) {
  Vector v = Vector::Zero(dim);
  v(k) = 1.0;
  return v;
}

inline Matrix projector(const Vector& v) { return v * v.adjoint(); }

/// Maximally entangled |omega> = sum_i |i,i> / sqrt(d).
inline Vector bell_vector(Index d) {
  Vector v = Vector::Zero(d * d);
  for (Index i = 0; i < d; ++i) v(i * d + i) = 1.0 / std::sqrt(static_cast<double>(d));
  return v;
}

// ---------------------------------------------------------------------------
// Decompositions

struct SvdResult {
  Matrix u;
  RealVector s;  // descending
  Matrix v;      // m = u * diag(s) * v^dagger
};

inline SvdResult svd(const Matrix& m) {
  if (m.size() == 0)
    throw Error(ErrorKind::invalid_argument, "svd of an empty matrix");
  Eigen::BDCSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::numerical,
                detail::cat("svd failed to converge on a ", m.rows(), "x", m.cols(), " matrix"));
  return {solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

struct EighResult {
  RealVector values;  // ascending
  Matrix vectors;     // columns
};

/// Fixes the phase of each column so its first non-negligible entry is real positive.
inline void fix_phases(Matrix& vectors, double tol = 1e-12) {
  for (Index c = 0; c < vectors.cols(); ++c) {
    for (Index r = 0; r < vectors.rows(); ++r) {
      const double mag = std::abs(vectors(r, c));
      if (mag > tol) {
        vectors.col(c) *= std::conj(vectors(r, c)) / mag;
        break;
      }
    }
  }
}

/// Hermitian eigendecomposition with ascending eigenvalues and fixed eigenvector phases.
inline EighResult eigh(const Matrix& m, double tol = Tolerance::equality) {
  if (!is_hermitian(m, tol))
    throw Error(ErrorKind::not_hermitian, "eigh requires a Hermitian matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()));
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::numerical,
                detail::cat("eigensolver failed on a ", m.rows(), "x", m.cols(), " matrix"));
  EighResult out{es.eigenvalues(), es.eigenvectors()};
  fix_phases(out.vectors);
  return out;
}

/// Applies f to the spectrum of a Hermitian matrix.
template <typename F>
Matrix hermitian_function(const Matrix& m, F&& f) {
  const auto eig = eigh(m);
  Vector mapped(eig.values.size());
  for (Index k = 0; k < eig.values.size(); ++k) mapped(k) = f(eig.values(k));
  return eig.vectors * mapped.asDiagonal() * eig.vectors.adjoint();
}

/// Square root of a Hermitian PSD matrix; eigenvalues in [-tol, 0) are clamped to zero.
inline Matrix psd_sqrt(const Matrix& m, double tol = Tolerance::psd_clamp) {
  require_square(m, "psd_sqrt input");
  const auto eig = eigh(m, std::max(tol, Tolerance::equality));
  const double lowest = eig.values.size() ? eig.values.minCoeff() : 0.0;
  if (lowest < -tol)
    throw Error(ErrorKind::not_psd, detail::cat("eigenvalue ", lowest, " is below -", tol));
  Vector roots(eig.values.size());
  for (Index k = 0; k < roots.size(); ++k) roots(k) = std::sqrt(std::max(0.0, eig.values(k)));
  return eig.vectors * roots.asDiagonal() * eig.vectors.adjoint();
}

/// exp(scalar * m). Hermitian inputs go through the eigendecomposition, everything else
/// through Eigen's scaling-and-squaring Pade implementation.
inline Matrix matrix_exp(const Matrix& m, Complex scalar) {
  require_square(m, "matrix_exp input");
  if (m.size() == 0) return m;
  Matrix out;
  if (is_hermitian(m, 1e-13)) {
    const auto eig = eigh(m, 1e-13);
    Vector phases(eig.values.size());
    for (Index k = 0; k < phases.size(); ++k) phases(k) = std::exp(scalar * eig.values(k));
    out = eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();
  } else {
    out = (scalar * m).exp();
  }
  if (!out.allFinite())
    throw Error(ErrorKind::numerical, "matrix exponential overflowed");
  return out;
}

// ---------------------------------------------------------------------------
// Vectorization

struct VectorizedState {
  Index dim = 0;
  Vector entries;  // length dim * dim, row index major
};

inline VectorizedState vectorize(const Matrix& rho) {
  require_square(rho, "vectorize input");
  VectorizedState out{rho.rows(), Vector(rho.size())};
  for (Index i = 0; i < rho.rows(); ++i)
    for (Index j = 0; j < rho.cols(); ++j) out.entries(i * rho.cols() + j) = rho(i, j);
  return out;
}

inline Matrix devectorize(const VectorizedState& v) {
  if (v.entries.size() != v.dim * v.dim)
    throw Error(ErrorKind::dimension_mismatch,
                detail::cat("vectorized state of dim ", v.dim, " has ", v.entries.size(), " entries"));
  Matrix rho(v.dim, v.dim);
  for (Index i = 0; i < v.dim; ++i)
    for (Index j = 0; j < v.dim; ++j) rho(i, j) = v.entries(i * v.dim + j);
  return rho;
}

inline Matrix devectorize(const Vector& entries) {
  const auto dim = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(entries.size()))));
  return devectorize(VectorizedState{dim, entries});
}

// ---------------------------------------------------------------------------
// Multi-leg helpers for dense states on a tensor product of legs.

namespace detail {
inline std::vector<Index> strides_of(std::span<const Index> dims) {
  std::vector<Index> strides(dims.size(), 1);
  for (std::size_t k = dims.size(); k-- > 1;) strides[k - 1] = strides[k] * dims[k];
  return strides;
}

inline void check_legs(std::span<const Index> dims, std::span<const int> legs) {
  std::vector<bool> seen(dims.size(), false);
  for (int leg : legs) {
    if (leg < 0 || static_cast<std::size_t>(leg) >= dims.size() || seen[leg])
      throw Error(ErrorKind::invalid_argument, cat("invalid or repeated leg ", leg));
    seen[leg] = true;
  }
}
}  // namespace detail

/// Full operator on the product of `dims` acting as `op` on `targets` (in that order).
inline Matrix embed(const Matrix& op, std::span<const int> targets, std::span<const Index> dims) {
  detail::check_legs(dims, targets);
  std::vector<Index> target_dims;
  for (int t : targets) target_dims.push_back(dims[t]);
  const Index sub = product(target_dims);
  if (op.rows() != sub || op.cols() != sub)
    throw Error(ErrorKind::dimension_mismatch,
                detail::cat("operator is ", op.rows(), "x", op.cols(), " but targets span ", sub));
  const Index total = product(dims);
  const auto strides = detail::strides_of(dims);
  const auto sub_strides = detail::strides_of(target_dims);
  std::vector<bool> is_target(dims.size(), false);
  for (int t : targets) is_target[t] = true;

  // offset of each target sub-index inside the full index
  std::vector<Index> sub_offset(sub, 0);
  for (Index s = 0; s < sub; ++s) {
    Index off = 0;
    for (std::size_t k = 0; k < targets.size(); ++k)
      off += ((s / sub_strides[k]) % target_dims[k]) * strides[targets[k]];
    sub_offset[s] = off;
  }
  Matrix out = Matrix::Zero(total, total);
  for (Index full = 0; full < total; ++full) {
    Index s_col = 0, base = full;
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const Index digit = (full / strides[targets[k]]) % dims[targets[k]];
      s_col += digit * sub_strides[k];
      base -= digit * strides[targets[k]];
    }
    for (Index s_row = 0; s_row < sub; ++s_row) {
      const Complex value = op(s_row, s_col);
      if (value != Complex{}) out(base + sub_offset[s_row], full) += value;
    }
  }
  return out;
}

/// Reduced density matrix on `keep` (in that order).
inline Matrix partial_trace(const Matrix& rho, std::span<const Index> dims, std::span<const int> keep) {
  detail::check_legs(dims, keep);
  const Index total = product(dims);
  if (rho.rows() != total || rho.cols() != total)
    throw Error(ErrorKind::dimension_mismatch, "partial_trace: density does not match leg dims");
  std::vector<int> traced;
  std::vector<bool> kept(dims.size(), false);
  for (int k : keep) kept[k] = true;
  for (int k = 0; k < static_cast<int>(dims.size()); ++k)
    if (!kept[k]) traced.push_back(k);
  std::vector<Index> keep_dims, traced_dims;
  for (int k : keep) keep_dims.push_back(dims[k]);
  for (int k : traced) traced_dims.push_back(dims[k]);
  const auto strides = detail::strides_of(dims);
  const auto keep_strides = detail::strides_of(keep_dims);
  const auto traced_strides = detail::strides_of(traced_dims);
  const Index nk = product(keep_dims), nt = product(traced_dims);

  auto full_index = [&](Index k_idx, Index t_idx) {
    Index f = 0;
    for (std::size_t a = 0; a < keep.size(); ++a)
      f += ((k_idx / keep_strides[a]) % keep_dims[a]) * strides[keep[a]];
    for (std::size_t a = 0; a < traced.size(); ++a)
      f += ((t_idx / traced_strides[a]) % traced_dims[a]) * strides[traced[a]];
    return f;
  };
  Matrix out = Matrix::Zero(nk, nk);
  for (Index i = 0; i < nk; ++i)
    for (Index j = 0; j < nk; ++j) {
      Complex acc{};
      for (Index t = 0; t < nt; ++t) acc += rho(full_index(i, t), full_index(j, t));
      out(i, j) = acc;
    }
  return out;
}

/// Reorders the legs of a vector: result leg k is input leg order[k].
inline Vector permute_legs(const Vector& v, std::span<const Index> dims, std::span<const int> order) {
  detail::check_legs(dims, order);
  if (order.size() != dims.size())
    throw Error(ErrorKind::invalid_argument, "permute_legs needs a full permutation");
  std::vector<Index> new_dims;
  for (int o : order) new_dims.push_back(dims[o]);
  const auto strides = detail::strides_of(dims);
  const auto new_strides = detail::strides_of(new_dims);
  Vector out(v.size());
  for (Index n = 0; n < v.size(); ++n) {
    Index old = 0;
    for (std::size_t k = 0; k < order.size(); ++k)
      old += ((n / new_strides[k]) % new_dims[k]) * strides[order[k]];
    out(n) = v(old);
  }
  return out;
}

}  // namespace epsim
