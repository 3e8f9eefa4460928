#pragma once

// Matrix-product states
//   psi_{i_1..i_N} = Tr(B A^{(N)}_{i_N} ... A^{(1)}_{i_1}).
// A^{(n)}_{i} maps bond n to bond n + 1, so it is a chi_{n+1} x chi_n matrix, and B is
// chi_1 x chi_{N+1}. Sites are 0-based in the API: tensors[n] is site n, bond n is its
// input bond and bond n + 1 its output bond.
//
// Left-canonical means sum_i A_i^dagger A_i = 1 at every site, which makes every site tensor
// the Kraus set of a channel from its input bond to its output bond.

#include <optional>

#include "epsim/channels.hpp"
#include "epsim/random.hpp"
#include "epsim/tensor.hpp"

namespace epsim {

enum class Canonical { none, left, right };

struct MPS {
  std::vector<std::vector<Matrix>> tensors;  // tensors[n][i]
  Matrix boundary = Matrix::Identity(1, 1);
  Canonical canonical = Canonical::none;
  std::vector<RealVector> schmidt;  // per inner bond when known (from_statevector / truncate)

  int n_sites() const { return static_cast<int>(tensors.size()); }
  Index phys_dim(int n) const { return static_cast<Index>(tensors[n].size()); }
  std::vector<Index> phys_dims() const {
    std::vector<Index> d;
    for (const auto& t : tensors) d.push_back(static_cast<Index>(t.size()));
    return d;
  }
  /// chi_n for n = 0..N (bond N is the output bond of the last site).
  Index bond_dim(int n) const {
    if (n < n_sites()) return tensors[n].front().cols();
    return tensors.back().front().rows();
  }
  std::vector<Index> bond_dims() const {
    std::vector<Index> b;
    for (int n = 0; n <= n_sites(); ++n) b.push_back(bond_dim(n));
    return b;
  }
  bool open_boundary() const { return bond_dim(0) == 1 && bond_dim(n_sites()) == 1; }
};

inline void validate(const MPS& m) {
  if (m.tensors.empty()) throw Error(ErrorKind::invalid_argument, "MPS needs at least one site");
  for (int n = 0; n < m.n_sites(); ++n) {
    const auto& t = m.tensors[n];
    if (t.empty()) throw Error(ErrorKind::invalid_argument, detail::cat("site ", n, " has no physical values"));
    for (const auto& a : t)
      if (a.rows() != t.front().rows() || a.cols() != t.front().cols())
        throw Error(ErrorKind::dimension_mismatch, detail::cat("site ", n, ": matrices differ in shape"));
    if (n + 1 < m.n_sites() && m.tensors[n + 1].front().cols() != t.front().rows())
      throw Error(ErrorKind::dimension_mismatch,
                  detail::cat("bond ", n + 1, ": site ", n, " emits ", t.front().rows(), " but site ", n + 1,
                              " takes ", m.tensors[n + 1].front().cols()));
  }
  if (m.boundary.rows() != m.bond_dim(0) || m.boundary.cols() != m.bond_dim(m.n_sites()))
    throw Error(ErrorKind::dimension_mismatch, "boundary must be chi_1 x chi_{N+1}");
}

inline double left_canonical_defect(const MPS& m, int n) {
  const auto& t = m.tensors[n];
  Matrix g = Matrix::Zero(t.front().cols(), t.front().cols());
  for (const auto& a : t) g += a.adjoint() * a;
  return (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

inline bool is_left_canonical(const MPS& m, double tol = Tolerance::equality) {
  for (int n = 0; n < m.n_sites(); ++n)
    if (left_canonical_defect(m, n) > tol) return false;
  return true;
}

inline bool is_right_canonical(const MPS& m, double tol = Tolerance::equality) {
  for (const auto& t : m.tensors) {
    Matrix g = Matrix::Zero(t.front().rows(), t.front().rows());
    for (const auto& a : t) g += a * a.adjoint();
    if ((g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}

inline constexpr Index kMaxStatevector = Index{1} << 20;

inline Vector to_statevector(const MPS& m) {
  validate(m);
  const auto dims = m.phys_dims();
  const Index total = product(dims);
  if (total > kMaxStatevector)
    throw Error(ErrorKind::size_guard, detail::cat("to_statevector: dimension ", total, " exceeds 2^20"));
  // partial[p] = A_{i_n} ... A_{i_1} for prefix p (i_1 major)
  std::vector<Matrix> partial{Matrix::Identity(m.bond_dim(0), m.bond_dim(0))};
  for (int n = 0; n < m.n_sites(); ++n) {
    std::vector<Matrix> next;
    next.reserve(partial.size() * dims[n]);
    for (const auto& p : partial)
      for (const auto& a : m.tensors[n]) next.push_back(a * p);
    partial = std::move(next);
  }
  Vector psi(total);
  for (Index k = 0; k < total; ++k) psi(k) = (m.boundary * partial[k]).trace();
  return psi;
}

struct TruncationReport {
  double discarded_weight = 0.0;
  std::vector<double> discarded_per_bond;
};

namespace detail {
/// Number of singular values kept: at most chi_max, drops values below tol, keeps at least one.
inline Index kept_count(const RealVector& s, Index chi_max, double tol) {
  Index keep = std::min<Index>(s.size(), chi_max);
  while (keep > 1 && s(keep - 1) < tol) --keep;
  return keep;
}
}  // namespace detail

/// Left-canonical open-boundary MPS by successive SVDs from the last site down to the first.
/// The result is the truncated projection of psi; B holds its norm.
inline MPS from_statevector(const Vector& psi, const std::vector<Index>& dims, Index chi_max = 1 << 20,
                            double trunc_tol = 1e-14, TruncationReport* report = nullptr) {
  if (dims.empty()) throw Error(ErrorKind::invalid_argument, "from_statevector needs at least one site");
  if (product(dims) != psi.size())
    throw Error(ErrorKind::dimension_mismatch,
                detail::cat("product of dims ", product(dims), " differs from vector length ", psi.size()));
  if (std::abs(psi.norm() - 1.0) > 1e-10) throw Error(ErrorKind::invalid_state, "from_statevector expects a unit vector");
  if (chi_max < 1) throw Error(ErrorKind::invalid_argument, "chi_max must be positive");
  const int n_sites = static_cast<int>(dims.size());
  MPS m;
  m.tensors.resize(n_sites);
  m.schmidt.resize(n_sites - 1);
  TruncationReport rep;
  rep.discarded_per_bond.assign(n_sites - 1, 0.0);

  // c[beta, rest] with rest enumerating i_1..i_n (i_1 major), beta the output bond of site n
  Matrix c = psi.transpose();
  for (int n = n_sites - 1; n >= 1; --n) {
    const Index chi_out = c.rows();
    const Index rest = c.cols() / dims[n];
    // x[(beta, i_n), rest']
    Matrix x(chi_out * dims[n], rest);
    for (Index b = 0; b < chi_out; ++b)
      for (Index i = 0; i < dims[n]; ++i)
        for (Index r = 0; r < rest; ++r) x(b * dims[n] + i, r) = c(b, r * dims[n] + i);
    const auto f = svd(x);
    const Index keep = detail::kept_count(f.s, chi_max, trunc_tol);
    double dropped = 0.0;
    for (Index k = keep; k < f.s.size(); ++k) dropped += f.s(k) * f.s(k);
    rep.discarded_per_bond[n - 1] = dropped;
    rep.discarded_weight += dropped;
    m.schmidt[n - 1] = f.s.head(keep);
    auto& site = m.tensors[n];
    site.assign(dims[n], Matrix(chi_out, keep));
    for (Index i = 0; i < dims[n]; ++i)
      for (Index b = 0; b < chi_out; ++b)
        for (Index k = 0; k < keep; ++k) site[i](b, k) = f.u(b * dims[n] + i, k);
    c = f.s.head(keep).asDiagonal() * f.v.leftCols(keep).adjoint();
  }
  // site 0: c[beta, i_1]
  const double norm = c.norm();
  if (norm == 0.0) throw Error(ErrorKind::numerical, "state truncated to zero");
  m.tensors[0].assign(dims[0], Matrix(c.rows(), 1));
  for (Index i = 0; i < dims[0]; ++i) m.tensors[0][i].col(0) = c.col(i) / norm;
  m.boundary = Matrix::Constant(1, 1, norm);
  m.canonical = Canonical::left;
  if (report) *report = rep;
  return m;
}

/// Left: QR sweep from the last site down, remainder absorbed into B.
/// Right: LQ sweep from the first site up, remainder absorbed into B.
inline MPS canonicalize(const MPS& in, Canonical direction) {
  validate(in);
  MPS m = in;
  m.schmidt.clear();
  const int n_sites = m.n_sites();
  if (direction == Canonical::left) {
    Matrix r;
    for (int n = n_sites - 1; n >= 0; --n) {
      auto& t = m.tensors[n];
      if (n < n_sites - 1)
        for (auto& a : t) a = r * a;
      const Index d = static_cast<Index>(t.size()), rows = t.front().rows(), cols = t.front().cols();
      Matrix stack(d * rows, cols);
      for (Index i = 0; i < d; ++i) stack.middleRows(i * rows, rows) = t[i];
      Eigen::HouseholderQR<Matrix> qr(stack);
      const Index k = std::min(d * rows, cols);
      const Matrix q = qr.householderQ() * Matrix::Identity(d * rows, k);
      r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
      for (Index i = 0; i < d; ++i) t[i] = q.middleRows(i * rows, rows);
    }
    m.boundary = r * m.boundary;
  } else if (direction == Canonical::right) {
    Matrix l;
    for (int n = 0; n < n_sites; ++n) {
      auto& t = m.tensors[n];
      if (n > 0)
        for (auto& a : t) a = a * l;
      const Index d = static_cast<Index>(t.size()), rows = t.front().rows(), cols = t.front().cols();
      // [A_0 A_1 ...] = L Q, via QR of the adjoint
      Matrix stack(rows, d * cols);
      for (Index i = 0; i < d; ++i) stack.middleCols(i * cols, cols) = t[i];
      Eigen::HouseholderQR<Matrix> qr(stack.adjoint());
      const Index k = std::min(rows, d * cols);
      const Matrix q = qr.householderQ() * Matrix::Identity(d * cols, k);
      const Matrix rr = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
      l = rr.adjoint();
      const Matrix qa = q.adjoint();
      for (Index i = 0; i < d; ++i) t[i] = qa.middleCols(i * cols, cols);
    }
    m.boundary = m.boundary * l;
  }
  m.canonical = direction;
  return m;
}

/// Left-canonical SVD truncation of an open-boundary MPS; the report carries the discarded
/// squared singular values relative to the current norm.
inline MPS truncate(const MPS& in, Index chi_max, double tol = 0.0, TruncationReport* report = nullptr) {
  validate(in);
  if (!in.open_boundary()) throw Error(ErrorKind::invalid_argument, "truncate requires open boundary conditions");
  if (chi_max < 1) throw Error(ErrorKind::invalid_argument, "chi_max must be positive");
  MPS m = in;
  const Complex b = m.boundary(0, 0);
  for (auto& a : m.tensors.back()) a *= b;
  m.boundary = Matrix::Identity(1, 1);
  m = canonicalize(m, Canonical::right);
  const double norm = std::abs(m.boundary(0, 0));
  for (auto& a : m.tensors.back()) a *= m.boundary(0, 0) / norm;
  m.boundary = Matrix::Identity(1, 1);

  const int n_sites = m.n_sites();
  TruncationReport rep;
  rep.discarded_per_bond.assign(std::max(0, n_sites - 1), 0.0);
  m.schmidt.assign(std::max(0, n_sites - 1), RealVector());
  Matrix carry = Matrix::Identity(1, 1);
  for (int n = n_sites - 1; n >= 1; --n) {
    auto& t = m.tensors[n];
    const Index d = static_cast<Index>(t.size());
    for (auto& a : t) a = carry * a;
    const Index rows = t.front().rows(), cols = t.front().cols();
    Matrix x(rows * d, cols);
    for (Index bb = 0; bb < rows; ++bb)
      for (Index i = 0; i < d; ++i) x.row(bb * d + i) = t[i].row(bb);
    const auto f = svd(x);
    const Index keep = detail::kept_count(f.s, chi_max, tol);
    double dropped = 0.0;
    for (Index k = keep; k < f.s.size(); ++k) dropped += f.s(k) * f.s(k);
    rep.discarded_per_bond[n - 1] = dropped;
    rep.discarded_weight += dropped;
    m.schmidt[n - 1] = f.s.head(keep);
    for (Index i = 0; i < d; ++i) {
      Matrix a(rows, keep);
      for (Index bb = 0; bb < rows; ++bb) a.row(bb) = f.u.row(bb * d + i).head(keep);
      t[i] = a;
    }
    carry = f.s.head(keep).asDiagonal() * f.v.leftCols(keep).adjoint();
  }
  auto& first = m.tensors[0];
  for (auto& a : first) a = carry * a;
  double w = 0.0;
  for (const auto& a : first) w += a.squaredNorm();
  const double local = std::sqrt(w);
  for (auto& a : first) a /= local;
  m.boundary = Matrix::Constant(1, 1, norm * local);
  m.canonical = Canonical::left;
  if (report) *report = rep;
  return m;
}

// ---------------------------------------------------------------------------
// Transfer-operator evaluators

/// Tr(M_{N} ... M_{1} (B (x) B*)) with M_n = transfer_obs(site n, O_n) or transfer(site n).
inline Complex transfer_contract(const MPS& m, const std::vector<std::optional<Matrix>>& ops) {
  validate(m);
  const int n_sites = m.n_sites();
  // x starts as B (x) B* and absorbs M_N, ..., M_1 on the right:  Tr(B~ M_N ... M_1)
  Matrix x = kron(m.boundary, Matrix(m.boundary.conjugate()));
  for (int n = n_sites - 1; n >= 0; --n) {
    const auto& t = m.tensors[n];
    const TransferOperator mt = ops[n] ? transfer_obs(t, *ops[n]) : transfer_obs(t, Matrix::Identity(t.size(), t.size()));
    x = x * mt.matrix;
  }
  return x.trace();
}

inline double norm_sq(const MPS& m) {
  return transfer_contract(m, std::vector<std::optional<Matrix>>(m.n_sites())).real();
}

using SiteOperators = std::vector<std::pair<int, Matrix>>;

inline Complex expectation_product(const MPS& m, const SiteOperators& ops) {
  validate(m);
  std::vector<std::optional<Matrix>> per_site(m.n_sites());
  for (const auto& [site, o] : ops) {
    if (site < 0 || site >= m.n_sites())
      throw Error(ErrorKind::dimension_mismatch, detail::cat("site ", site, " out of range"));
    if (per_site[site]) throw Error(ErrorKind::invalid_argument, detail::cat("site ", site, " listed twice"));
    if (o.rows() != m.phys_dim(site) || o.cols() != m.phys_dim(site))
      throw Error(ErrorKind::dimension_mismatch,
                  detail::cat("operator at site ", site, " must be ", m.phys_dim(site), "x", m.phys_dim(site)));
    per_site[site] = o;
  }
  return transfer_contract(m, per_site);
}

inline Complex two_point_correlator(const MPS& m, const Matrix& ox, int x, const Matrix& oy, int y) {
  if (x >= y) throw Error(ErrorKind::invalid_argument, detail::cat("two_point_correlator needs x < y, got ", x, ", ", y));
  return expectation_product(m, {{x, ox}, {y, oy}});
}

/// The same correlator evaluated as a sum over eigenprojector branches of O_x and O_y:
/// the bond state starts at |l><l|, passes the site channels, and at x (resp. y) the branch
/// operator D = sum_i conj(eta_i) A_i replaces the channel; the result is read out against
/// <r| . |r> and weighted by the eigenvalues.
inline Complex two_point_correlator_branches(const MPS& m, const Matrix& ox, int x, const Matrix& oy, int y) {
  validate(m);
  if (x >= y) throw Error(ErrorKind::invalid_argument, "two_point_correlator_branches needs x < y");
  if (x < 0 || y >= m.n_sites()) throw Error(ErrorKind::dimension_mismatch, "correlator sites out of range");
  if (!is_left_canonical(m)) throw Error(ErrorKind::not_canonical, "branch evaluation uses site channels; canonicalize first");
  const auto bsvd = svd(m.boundary);
  if (bsvd.s.size() > 1 && bsvd.s(1) > 1e-12 * bsvd.s(0))
    throw Error(ErrorKind::invalid_argument, "branch evaluation needs a rank-one boundary B = |l><r|");
  // B = s |u><v| gives psi = s <v| A_N ... A_1 |u>
  const Vector ell = bsvd.u.col(0);
  const Vector r = bsvd.v.col(0) * bsvd.s(0);
  const auto ex = eigh(ox), ey = eigh(oy);

  auto run = [&](const Vector& eta_x, const Vector& eta_y) {
    Matrix rho = ell * ell.adjoint();
    for (int n = 0; n < m.n_sites(); ++n) {
      const auto& t = m.tensors[n];
      if (n == x || n == y) {
        const Vector& eta = n == x ? eta_x : eta_y;
        Matrix dop = Matrix::Zero(t.front().rows(), t.front().cols());
        for (std::size_t i = 0; i < t.size(); ++i) dop += std::conj(eta(i)) * t[i];
        rho = dop * rho * dop.adjoint();
      } else {
        Matrix next = Matrix::Zero(t.front().rows(), t.front().rows());
        for (const auto& a : t) next += a * rho * a.adjoint();
        rho = next;
      }
    }
    return (r.adjoint() * rho * r)(0, 0);
  };

  Complex total{};
  for (Index a = 0; a < ex.values.size(); ++a)
    for (Index b = 0; b < ey.values.size(); ++b)
      total += ex.values(a) * ey.values(b) * run(ex.vectors.col(a), ey.vectors.col(b));
  return total;
}

inline Channel site_channel(const MPS& m, int n) {
  validate(m);
  if (n < 0 || n >= m.n_sites()) throw Error(ErrorKind::dimension_mismatch, detail::cat("site ", n, " out of range"));
  if (!is_left_canonical(m))
    throw Error(ErrorKind::not_canonical, "site tensors form channels only in left-canonical gauge; canonicalize first");
  return Channel(m.tensors[n]);
}

// ---------------------------------------------------------------------------
// Constructors

inline MPS product_mps(const std::vector<Vector>& states) {
  MPS m;
  double norm = 1.0;
  for (const auto& v : states) {
    const double vn = v.norm();
    if (vn == 0.0) throw Error(ErrorKind::invalid_state, "product_mps: zero site vector");
    norm *= vn;
    std::vector<Matrix> t;
    for (Index i = 0; i < v.size(); ++i) t.push_back(Matrix::Constant(1, 1, v(i) / vn));
    m.tensors.push_back(std::move(t));
  }
  m.boundary = Matrix::Constant(1, 1, norm);
  m.canonical = Canonical::left;
  return m;
}

/// Random normalized open-boundary MPS with bond dimensions min(chi, d^n, d^(N-n)), left-canonical.
inline MPS random_mps(int n_sites, Index d, Index chi, Rng& rng) {
  MPS m;
  std::vector<Index> bonds(n_sites + 1, 1);
  for (int n = 1; n < n_sites; ++n) {
    Index cap = 1, capr = 1;
    for (int k = 0; k < n && cap < chi; ++k) cap *= d;
    for (int k = n; k < n_sites && capr < chi; ++k) capr *= d;
    bonds[n] = std::min({chi, cap, capr});
  }
  for (int n = 0; n < n_sites; ++n) {
    std::vector<Matrix> t;
    for (Index i = 0; i < d; ++i) t.push_back(random_ginibre(bonds[n + 1], bonds[n], rng));
    m.tensors.push_back(std::move(t));
  }
  m = canonicalize(m, Canonical::left);
  m.boundary /= std::abs(m.boundary(0, 0));
  return m;
}

inline MPS scaled(const MPS& in, Complex factor) {
  MPS m = in;
  m.boundary *= factor;
  return m;
}

}  // namespace epsim
