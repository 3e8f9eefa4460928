#pragma once

// Interferometric estimators and the algorithms built on them: thermal values from
// real-time moments, entropy from a modular Hamiltonian, transition amplitudes through
// reflections and matrix elements of Hermitian observables.

#include <cstdint>
#include <optional>
#include <random>

#include "epsim/hamiltonians.hpp"
#include "epsim/oracle.hpp"
#include "epsim/parallel.hpp"
#include "epsim/random.hpp"

namespace epsim {

struct EstimatorMode {
  std::int64_t shots = 0;  // 0 means exact
  std::uint64_t seed = 0;

  static EstimatorMode exact() { return {}; }
  static EstimatorMode sampled(std::int64_t shots, std::uint64_t seed) {
    if (shots < 1) throw Error(ErrorKind::invalid_argument, "shot count must be positive");
    return {shots, seed};
  }
  bool is_exact() const { return shots == 0; }
};

struct AmplitudeEstimate {
  Complex value{0.0, 0.0};
  double stderr_ = 0.0;
  std::int64_t shots = 0;
  // controller statistics: probabilities of the + outcome in the x and y bases
  double p_x = 0.0;
  double p_y = 0.0;
};

namespace detail {

inline void require_state(const Vector& a, const char* what) {
  if (a.size() == 0 || std::abs(a.norm() - 1.0) > 1e-8)
    throw Error(ErrorKind::invalid_state, detail::cat(what, " must be a normalized vector"));
}

inline void require_unitary(const Matrix& u, const char* what) {
  require_square(u, what);
  if (!is_unitary(u)) throw Error(ErrorKind::not_unitary, detail::cat(what, " is not unitary, defect ", unitarity_defect(u)));
}

// Draws n two-outcome shots with success probability p; returns (mean of 2x - 1, its stderr).
inline std::pair<double, double> pm_estimate(double p, std::int64_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::binomial_distribution<std::int64_t> dist(n, std::clamp(p, 0.0, 1.0));
  const double ph = static_cast<double>(dist(rng)) / static_cast<double>(n);
  return {2.0 * ph - 1.0, 2.0 * std::sqrt(ph * (1.0 - ph) / static_cast<double>(n))};
}

}  // namespace detail

/// Controller |+>, controlled-U on a, then <sigma_x> = Re<a|U|a> and <sigma_y> = Im<a|U|a>.
inline AmplitudeEstimate hadamard_test(const Matrix& u, const Vector& a,
                                       const EstimatorMode& mode = EstimatorMode::exact()) {
  detail::require_unitary(u, "hadamard_test: U");
  detail::require_state(a, "hadamard_test: a");
  if (u.rows() != a.size()) throw Error(ErrorKind::dimension_mismatch, "hadamard_test: U and a differ in dimension");
  const Index d = a.size();
  // controller is the major index: psi = (|0>|a> + |1>U|a>)/sqrt2
  Vector psi(2 * d);
  psi.head(d) = a / std::sqrt(2.0);
  psi.tail(d) = (u * a) / std::sqrt(2.0);
  const Complex coherence = psi.head(d).dot(psi.tail(d));  // sum conj(alpha) beta
  const double sx = 2.0 * coherence.real(), sy = 2.0 * coherence.imag();
  AmplitudeEstimate out;
  out.p_x = 0.5 * (1.0 + sx);
  out.p_y = 0.5 * (1.0 + sy);
  if (mode.is_exact()) {
    out.value = {sx, sy};
    return out;
  }
  const auto [re, se_re] = detail::pm_estimate(out.p_x, mode.shots, derive_seed(mode.seed, 0));
  const auto [im, se_im] = detail::pm_estimate(out.p_y, mode.shots, derive_seed(mode.seed, 1));
  out.value = {re, im};
  out.stderr_ = std::hypot(se_re, se_im);
  out.shots = 2 * mode.shots;
  return out;
}

// Controlled-swap variant. Registers: controller c (major), system S = A (x) M with A the
// register U acts on and M an idle register in the maximally mixed state pi, and target T
// holding the eigenvector lambda. The circuit applies swap(A, T) controlled on c = 0, then
// U on A, then the controlled swap again.
//
// Derivation note. With U lambda = e^{i phi} lambda the c = 0 branch carries e^{i phi}|a>|lambda>
// and the c = 1 branch carries U|a>|lambda>, so on P_+ (x) P_a (x) pi (x) P_lambda
//   <sigma_x (x) P_a> = Re(e^{-i phi} <a|U|a>),   <sigma_y (x) P_a> = Im(e^{-i phi} <a|U|a>),
//   q = <1 (x) P_a>   = (1 + |<a|U|a>|^2) / 2.
// In terms of p_x = tr(rho (1 + sigma_x)/2 (x) P_a) and p_y likewise, <sigma (x) P_a> = 2 p - q,
// hence <a|U|a> = e^{i phi} ((2 p_x - q) + i (2 p_y - q)) with e^{i phi} = <lambda|U|lambda>.
// The relations are read off the simulated density matrix below; the tests compare against
// hadamard_test.
inline AmplitudeEstimate dqc1_cswap_estimate(const Matrix& u, const Vector& a, const Vector& lambda,
                                             const EstimatorMode& mode = EstimatorMode::exact(),
                                             Index idle_dim = 1) {
  detail::require_unitary(u, "dqc1_cswap_estimate: U");
  detail::require_state(a, "dqc1_cswap_estimate: a");
  detail::require_state(lambda, "dqc1_cswap_estimate: lambda");
  const Index d = u.rows();
  if (a.size() != d || lambda.size() != d)
    throw Error(ErrorKind::dimension_mismatch, "dqc1_cswap_estimate: state dimensions differ from U");
  if (idle_dim < 1) throw Error(ErrorKind::invalid_argument, "idle register dimension must be positive");
  const Vector ul = u * lambda;
  const Complex phase = lambda.dot(ul);
  if ((ul - phase * lambda).norm() > 1e-8)
    throw Error(ErrorKind::not_eigenvector, detail::cat("lambda is not an eigenvector of U, residual ",
                                                        (ul - phase * lambda).norm()));

  const std::vector<Index> dims{2, d, idle_dim, d};
  const Index total = product(dims);
  oracle::guard_dim(total, oracle::kMaxDensityDim, "controlled-swap density matrix");
  const Vector plus = Vector::Constant(2, 1.0 / std::sqrt(2.0));
  const Matrix idle = Matrix::Identity(idle_dim, idle_dim) / static_cast<double>(idle_dim);
  const std::vector<Matrix> parts{projector(plus), projector(a), idle, projector(lambda)};
  Matrix rho = kron_all(parts);

  const Matrix p0 = projector(basis_vector(2, 0)), p1 = projector(basis_vector(2, 1));
  const Matrix one_d = Matrix::Identity(d, d), one_m = Matrix::Identity(idle_dim, idle_dim);
  // swap of A and T with M in between
  const std::vector<Index> atm{d, idle_dim, d};
  const std::vector<int> order{2, 1, 0};
  Matrix swap_at = Matrix::Zero(d * idle_dim * d, d * idle_dim * d);
  for (Index k = 0; k < swap_at.cols(); ++k) {
    Vector e = basis_vector(swap_at.cols(), k);
    swap_at.col(k) = permute_legs(e, atm, order);
  }
  const Matrix one_rest = Matrix::Identity(d * idle_dim * d, d * idle_dim * d);
  const Matrix cswap = kron(p0, swap_at) + kron(p1, one_rest);
  const std::vector<Matrix> u_parts{Matrix::Identity(2, 2), u, one_m, one_d};
  const Matrix w = cswap * kron_all(u_parts) * cswap;
  rho = w * rho * w.adjoint();

  const std::vector<Matrix> pa_parts{Matrix::Identity(2, 2), projector(a), one_m, one_d};
  const Matrix pa = kron_all(pa_parts);
  const Matrix rest = Matrix::Identity(total / 2, total / 2);
  const Matrix plus_x = 0.5 * (Matrix::Identity(2, 2) + gates::pauli_x());
  const Matrix plus_y = 0.5 * (Matrix::Identity(2, 2) + gates::pauli_y());
  const Matrix c_x = kron(plus_x, rest), c_y = kron(plus_y, rest);
  const double q = (rho * pa).trace().real();
  const double p_x = (rho * c_x * pa).trace().real();
  const double p_y = (rho * c_y * pa).trace().real();

  AmplitudeEstimate out;
  out.p_x = p_x;
  out.p_y = p_y;
  if (mode.is_exact()) {
    out.value = phase * Complex(2.0 * p_x - q, 2.0 * p_y - q);
    return out;
  }
  // per shot: outcome (+, a) scores 1, (-, a) scores -1, anything else 0
  auto draw = [&](double p_plus, std::uint64_t seed) {
    SplitMix64 gen(seed);
    double sum = 0.0, sum_sq = 0.0;
    for (std::int64_t k = 0; k < mode.shots; ++k) {
      const double r = gen.uniform();
      const double x = r < p_plus ? 1.0 : (r < q ? -1.0 : 0.0);
      sum += x;
      sum_sq += x * x;
    }
    const double n = static_cast<double>(mode.shots);
    const double mean = sum / n;
    return std::pair{mean, std::sqrt(std::max(0.0, sum_sq / n - mean * mean) / n)};
  };
  const auto [re, se_re] = draw(p_x, derive_seed(mode.seed, 0));
  const auto [im, se_im] = draw(p_y, derive_seed(mode.seed, 1));
  out.value = phase * Complex(re, im);
  out.stderr_ = std::hypot(se_re, se_im);
  out.shots = 2 * mode.shots;
  return out;
}

/// Repetition-encoded controller: k physical controller qubits in (|0..0> + |1..1>)/sqrt2, one
/// per qubit pair of A and T, each controlling the swap of its pair. Returns the largest
/// deviation between the encoded circuit and the unencoded one on the logical subspace.
inline double encoded_cswap_residual(const Matrix& u) {
  detail::require_unitary(u, "encoded_cswap_residual: U");
  int k = 0;
  while ((Index{1} << k) < u.rows()) ++k;
  if ((Index{1} << k) != u.rows() || k < 1)
    throw Error(ErrorKind::dimension_mismatch, "encoded_cswap_residual needs U on whole qubits");
  const Index d = u.rows();
  oracle::guard_dim((Index{1} << k) * d * d, oracle::kMaxUnitaryDim, "encoded controlled-swap");
  const Matrix sw = gates::swap(2);
  // controller qubits c_0..c_{k-1}, then A qubits, then T qubits
  const int n_qubits = 3 * k;
  const std::vector<Index> dims(n_qubits, 2);
  const Index total = Index{1} << n_qubits;
  auto pair_swap = [&](int j) {
    // swap A_j and T_j
    Matrix m = Matrix::Zero(total, total);
    std::vector<int> order(n_qubits);
    for (int q = 0; q < n_qubits; ++q) order[q] = q;
    std::swap(order[k + j], order[2 * k + j]);
    for (Index c = 0; c < total; ++c) m.col(c) = permute_legs(basis_vector(total, c), dims, order);
    return m;
  };
  Matrix enc_cswap = Matrix::Identity(total, total);
  for (int j = 0; j < k; ++j) {
    const std::vector<int> ctrl{j};
    const Matrix p0 = embed(projector(basis_vector(2, 0)), ctrl, dims);
    const Matrix p1 = embed(projector(basis_vector(2, 1)), ctrl, dims);
    enc_cswap = (p0 * pair_swap(j) + p1) * enc_cswap;
  }
  std::vector<int> a_legs;
  for (int j = 0; j < k; ++j) a_legs.push_back(k + j);
  const Matrix u_a = embed(u, a_legs, dims);
  const Matrix w_enc = enc_cswap * u_a * enc_cswap;

  // unencoded: one controller, A, T
  const Index sys = d * d;
  Matrix swap_at = Matrix::Zero(sys, sys);
  const std::vector<Index> at{d, d};
  const std::vector<int> flip{1, 0};
  for (Index c = 0; c < sys; ++c) swap_at.col(c) = permute_legs(basis_vector(sys, c), at, flip);
  const Matrix cswap = kron(projector(basis_vector(2, 0)), swap_at) + kron(projector(basis_vector(2, 1)), Matrix::Identity(sys, sys));
  const Matrix w = cswap * kron(Matrix::Identity(2, 2), kron(u, Matrix::Identity(d, d))) * cswap;

  // encoding isometry |0>_L -> |0..0>, |1>_L -> |1..1> on the controller
  const Index nc = Index{1} << k;
  Matrix e = Matrix::Zero(nc, 2);
  e(0, 0) = 1.0;
  e(nc - 1, 1) = 1.0;
  const Matrix iso = kron(e, Matrix::Identity(sys, sys));
  return (w_enc * iso - iso * w).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Moments and thermal values

struct MomentSet {
  Index label = 0;
  RealVector moments;  // m_0 .. m_{s-1}
  double condition = 1.0;
  double residual = 0.0;  // largest |f(t_k) - model(t_k)|
};

inline constexpr double kMaxCondition = 1e12;

/// K equispaced times on (0, t_max]; {0} when t_max = 0.
inline std::vector<double> default_grid(int s, double t_max, int points = 0) {
  if (s < 1) throw Error(ErrorKind::invalid_argument, "moment count must be at least 1");
  if (t_max == 0.0) return {0.0};
  const int k = points > 0 ? points : 2 * s;
  std::vector<double> g;
  for (int j = 1; j <= k; ++j) g.push_back(t_max * j / k);
  return g;
}

/// Fits f(t_k) = sum_{n<s} (-i t_k)^n / n! m_n with real m_n. Even orders are fitted on Re f
/// and odd orders on Im f, each with columns scaled by T^n / n! (T the largest time).
inline MomentSet extract_moments(const std::vector<Complex>& f, const std::vector<double>& grid, int s) {
  if (s < 1) throw Error(ErrorKind::invalid_argument, "moment count must be at least 1");
  if (f.size() != grid.size()) throw Error(ErrorKind::dimension_mismatch, "one amplitude per grid time is required");
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error(ErrorKind::invalid_argument, "grid times must be distinct");
  const Index k = static_cast<Index>(grid.size());
  double t_scale = 0.0;
  for (double t : grid) t_scale = std::max(t_scale, std::abs(t));
  if (t_scale == 0.0) t_scale = 1.0;
  MomentSet out;
  out.moments = RealVector::Zero(s);
  for (int parity = 0; parity < 2; ++parity) {
    std::vector<int> orders;
    for (int n = parity; n < s; n += 2) orders.push_back(n);
    if (orders.empty()) continue;
    const Index cols = static_cast<Index>(orders.size());
    if (k < cols)
      throw Error(ErrorKind::ill_conditioned,
                  detail::cat("grid has ", k, " points but ", cols, " moments of parity ", parity, " are unknown"));
    Eigen::MatrixXd m(k, cols);
    Eigen::VectorXd y(k);
    for (Index r = 0; r < k; ++r) {
      const double x = grid[r] / t_scale;
      y(r) = parity == 0 ? f[r].real() : f[r].imag();
      for (Index c = 0; c < cols; ++c) {
        const int n = orders[c];
        const double sign = parity == 0 ? ((n / 2) % 2 == 0 ? 1.0 : -1.0) : (((n - 1) / 2) % 2 == 0 ? -1.0 : 1.0);
        m(r, c) = sign * std::pow(x, n);
      }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
    out.condition = std::max(out.condition, cond);
    if (!(cond <= kMaxCondition))
      throw Error(ErrorKind::ill_conditioned,
                  detail::cat("moment system condition number ", cond, " exceeds 1e12; lower s or shorten the time grid"));
    const Eigen::VectorXd c = svd.solve(y);
    const Eigen::VectorXd res = m * c - y;
    out.residual = std::max(out.residual, res.cwiseAbs().maxCoeff());
    for (Index j = 0; j < cols; ++j) {
      const int n = orders[j];
      out.moments(n) = c(j) * std::exp(std::lgamma(n + 1.0) - n * std::log(t_scale));
    }
  }
  return out;
}

/// Moments <a|H^n|a> from exact-mode Hadamard tests of e^{-i t_k H}.
inline MomentSet extract_moments(const Matrix& h, const Vector& a, int s, const std::vector<double>& grid) {
  if (!is_hermitian(h)) throw Error(ErrorKind::not_hermitian, "extract_moments: H is not Hermitian");
  std::vector<Complex> f;
  for (double t : grid) f.push_back(hadamard_test(matrix_exp(h, Complex(0.0, -t)), a).value);
  return extract_moments(f, grid, s);
}

/// Smallest s >= 1 with x^s / s! e^x <= eps for x = beta * h_norm.
inline int choose_truncation(double beta, double h_norm, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorKind::invalid_argument, "choose_truncation needs eps > 0");
  if (beta < 0.0 || h_norm < 0.0) throw Error(ErrorKind::invalid_argument, "choose_truncation needs beta, ||H|| >= 0");
  const double x = beta * h_norm;
  if (x == 0.0) return 1;
  const double log_eps = std::log(eps);
  for (int s = 1; s <= 400; ++s)
    if (s * std::log(x) - std::lgamma(s + 1.0) + x <= log_eps) return s;
  throw Error(ErrorKind::budget_infeasible, detail::cat("no truncation order up to 400 reaches ", eps, " at beta||H|| = ", x));
}

/// Bound on the omitted Taylor tail, x^s / s! e^x.
inline double taylor_tail(double x, int s) {
  if (x == 0.0) return 0.0;
  return std::exp(s * std::log(x) - std::lgamma(s + 1.0) + x);
}

enum class TimeEvolution { exact, trotter };

struct ThermalJob {
  Matrix observable;
  LocalHamiltonian hamiltonian;
  double beta = 0.0;
  double epsilon = 1e-3;
  int s = 0;                   // 0: chosen from the budget
  int fit_order = 0;           // lower limit on the fitted moment count, which is at least s
  TimeEvolution evolution = TimeEvolution::exact;
  std::int64_t substeps = 0;   // Trotter steps per grid spacing; 0: chosen from the budget
  std::vector<double> grid;    // empty: default_grid(s, beta)
  bool normalized = false;     // divide by the partition function
};

struct ThermalBudget {
  double taylor = 0.0, trotter = 0.0, solver = 0.0;
  double taylor_allocation = 0.0, trotter_allocation = 0.0, solver_allocation = 0.0;
};

struct ThermalResult {
  double value = 0.0;
  int s = 0;
  int fit_order = 0;
  std::vector<double> grid;
  std::int64_t substeps = 0;
  std::int64_t total_steps = 0;  // R for the largest grid time
  double tau = 0.0;
  double shift = 0.0;
  double max_condition = 1.0;
  ThermalBudget budget;
  std::vector<MomentSet> moments;
  Matrix eigenvectors;
  RealVector eigenvalues;
};

inline constexpr double kTaylorShare = 0.5, kTrotterShare = 0.25, kSolverShare = 0.25;

namespace detail {

inline Matrix matrix_power(Matrix base, std::int64_t e) {
  Matrix out = Matrix::Identity(base.rows(), base.cols());
  while (e > 0) {
    if (e & 1) out = out * base;
    e >>= 1;
    if (e > 0) base = base * base;
  }
  return out;
}

// polar factor, removes rounding drift accumulated over long products
inline Matrix nearest_unitary(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

// sum_{n>=s} x^n/n!, bounded by its first term over (1 - x/(s+1)) when that converges
inline double series_tail(double x, int s) {
  if (x == 0.0) return 0.0;
  const double first = std::exp(s * std::log(x) - std::lgamma(s + 1.0));
  if (x < s + 1.0) return first / (1.0 - x / (s + 1.0));
  return first * std::exp(x);
}

// sum_k |g_k| (tail(t_k h) + rounding) over both parity blocks, g the functional taking
// (Re f, Im f) on the grid to sum_{n<s} (-beta)^n/n! m_n when `fit` moments are fitted
inline double fit_error_bound(const std::vector<double>& grid, int fit, int s, double beta, double h) {
  double t_scale = 0.0;
  for (double t : grid) t_scale = std::max(t_scale, std::abs(t));
  const Index k = static_cast<Index>(grid.size());
  double gain = 0.0;
  for (int parity = 0; parity < 2; ++parity) {
    std::vector<int> orders;
    for (int n = parity; n < fit; n += 2) orders.push_back(n);
    if (orders.empty()) continue;
    const Index cols = static_cast<Index>(orders.size());
    if (k < cols) throw Error(ErrorKind::ill_conditioned, "grid has fewer points than unknown moments");
    Eigen::MatrixXd m(k, cols);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(cols);
    for (Index c = 0; c < cols; ++c) {
      const int n = orders[c];
      const double sign = parity == 0 ? ((n / 2) % 2 == 0 ? 1.0 : -1.0) : (((n - 1) / 2) % 2 == 0 ? -1.0 : 1.0);
      for (Index r = 0; r < k; ++r) m(r, c) = sign * std::pow(grid[r] / t_scale, n);
      if (n < s) w(c) = std::pow(-beta / t_scale, n);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (!(sv(sv.size() - 1) > 0.0 && sv(0) / sv(sv.size() - 1) <= kMaxCondition))
      throw Error(ErrorKind::ill_conditioned, "moment system condition number exceeds 1e12");
    // g = pinv(m)^T w = U S^{-1} V^T w
    const Eigen::VectorXd g = svd.matrixU() * (svd.matrixV().transpose() * w).cwiseQuotient(sv);
    for (Index r = 0; r < k; ++r) gain += std::abs(g(r)) * (series_tail(std::abs(grid[r]) * h, fit) + 1e-14);
  }
  return gain;
}

}  // namespace detail

/// Tr(A e^{-beta H}) (or divided by Tr e^{-beta H}) from fitted moments of each eigenstate of A.
/// H is shifted by c to centre its spectrum on zero first and the result rescaled by e^{-beta c}.
inline ThermalResult thermal_value(const ThermalJob& job) {
  const auto& h = job.hamiltonian;
  validate(h);
  const Matrix& a = job.observable;
  if (a.rows() != h.dim() || a.cols() != h.dim())
    throw Error(ErrorKind::dimension_mismatch, detail::cat("observable must be ", h.dim(), "x", h.dim()));
  if (!is_hermitian(a)) throw Error(ErrorKind::not_hermitian, "thermal_value: observable is not Hermitian");
  if (job.beta < 0.0) throw Error(ErrorKind::invalid_argument, "beta must be non-negative");
  if (!(job.epsilon > 0.0)) throw Error(ErrorKind::invalid_argument, "epsilon must be positive");

  ThermalResult out;
  const auto eig = eigh(a);
  out.eigenvalues = eig.values;
  out.eigenvectors = eig.vectors;
  const double alpha_sum = std::max(eig.values.cwiseAbs().sum(), 1e-300);

  // centre the spectrum: traceless terms for the circuits, then a scalar phase on the data
  const LocalHamiltonian hs = traceless(h);
  Matrix h_dense = dense(hs);
  const RealVector spectrum = eigh(h_dense).values;
  const double centre = 0.5 * (spectrum.minCoeff() + spectrum.maxCoeff());
  h_dense -= centre * Matrix::Identity(h_dense.rows(), h_dense.cols());
  const double hn = 0.5 * (spectrum.maxCoeff() - spectrum.minCoeff());
  out.shift = trace_shift(h) + centre;
  const double rescale = std::exp(-job.beta * out.shift);
  // accuracy needed on the shifted value
  const double eps = job.epsilon / rescale;
  const double x = job.beta * hn;

  auto& b = out.budget;
  b.taylor_allocation = kTaylorShare * eps;
  b.trotter_allocation = job.evolution == TimeEvolution::trotter ? kTrotterShare * eps : 0.0;
  b.solver_allocation = kSolverShare * eps;

  out.s = job.s > 0 ? job.s : choose_truncation(job.beta, hn, b.taylor_allocation / alpha_sum);
  b.taylor = alpha_sum * taylor_tail(x, out.s);
  if (b.taylor > b.taylor_allocation)
    throw Error(ErrorKind::budget_infeasible,
                detail::cat("Taylor tail bound ", b.taylor, " exceeds its allocation ", b.taylor_allocation, "; use s >= ",
                            choose_truncation(job.beta, hn, b.taylor_allocation / alpha_sum)));

  const bool trotter = job.evolution == TimeEvolution::trotter && job.beta > 0.0;
  const double c = trotter ? commutator_bound(hs) : 0.0;
  auto trotter_bound = [&](double tau) {
    const double dh = 0.5 * tau * c;
    return alpha_sum * job.beta * dh * std::exp(job.beta * (hn + dh));
  };
  // (T(tau))^{R_k} with R_k = k * substeps is e^{-i t_k H_eff}, ||H_eff - H|| <= tau C / 2 to leading order
  auto plan_trotter = [&](const std::vector<double>& grid) {
    const double dt = grid.front();
    for (std::size_t k = 0; k < grid.size(); ++k)
      if (std::abs(grid[k] - dt * static_cast<double>(k + 1)) > 1e-12 * std::max(1.0, grid.back()))
        throw Error(ErrorKind::invalid_argument, "Trotter evolution needs the grid t_k = k dt");
    std::int64_t r = job.substeps;
    if (r <= 0) {
      r = 1;
      if (c > 0.0) {
        const double target = b.trotter_allocation / (alpha_sum * job.beta * std::exp(job.beta * hn) * 1.01);
        r = static_cast<std::int64_t>(std::ceil(dt * c / (2.0 * target)));
        while (trotter_bound(dt / static_cast<double>(r)) > b.trotter_allocation) r = r + r / 10 + 1;
      }
    }
    return r;
  };

  // fitted orders beyond s absorb the tail of f on the grid; the solver bound propagates what is left
  // through the linear map from data to value
  if (job.beta == 0.0) {
    out.fit_order = out.s;
    out.grid = job.grid.empty() ? default_grid(out.s, 0.0) : job.grid;
  } else {
    const int first = std::max(out.s, job.fit_order);
    const std::vector<double> lengths =
        job.grid.empty() ? std::vector<double>{0.5, 0.75, 1.0, 1.5, 2.0} : std::vector<double>{0.0};
    double best = std::numeric_limits<double>::infinity();
    for (int fit = first; best > b.solver_allocation; ++fit) {
      bool conditioned = false;
      for (double length : lengths) {
        std::vector<double> grid = job.grid.empty() ? default_grid(fit, length * job.beta) : job.grid;
        if (static_cast<int>(grid.size()) < out.s)
          throw Error(ErrorKind::invalid_argument, detail::cat("grid needs at least s = ", out.s, " points"));
        double h_eff = hn;
        std::int64_t r = 0;
        if (trotter) {
          r = plan_trotter(grid);
          h_eff += 0.5 * c * grid.front() / static_cast<double>(r);
        }
        double bound;
        try {
          bound = alpha_sum * detail::fit_error_bound(grid, fit, out.s, job.beta, h_eff);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::ill_conditioned) throw;
          continue;
        }
        conditioned = true;
        if (bound < best) {
          best = bound;
          out.grid = std::move(grid);
          out.fit_order = fit;
          out.substeps = r;
        }
      }
      b.solver = best;
      const bool exhausted = !job.grid.empty() && 2 * (fit + 1) > static_cast<int>(job.grid.size()) + 1;
      if (best > b.solver_allocation && (!conditioned || exhausted)) {
        if (!std::isfinite(best))
          throw Error(ErrorKind::ill_conditioned,
                      detail::cat("moment fit with ", fit, " orders exceeds condition number 1e12; lower s or change the grid"));
        throw Error(ErrorKind::budget_infeasible,
                    detail::cat("solver bound ", best, " exceeds its allocation ", b.solver_allocation,
                                " at every well-conditioned fit order; raise epsilon"));
      }
    }
  }

  // time evolution at the grid times
  std::vector<Matrix> evolutions;
  if (!trotter) {
    for (double t : out.grid) evolutions.push_back(matrix_exp(h_dense, Complex(0.0, -t)));
  } else {
    const std::int64_t r = out.substeps;
    out.tau = out.grid.front() / static_cast<double>(r);
    b.trotter = trotter_bound(out.tau);
    if (b.trotter > b.trotter_allocation)
      throw Error(ErrorKind::budget_infeasible,
                  detail::cat("Trotter bound ", b.trotter, " exceeds its allocation ", b.trotter_allocation,
                              " with ", r, " steps per grid spacing"));
    out.total_steps = r * static_cast<std::int64_t>(out.grid.size());
    const Matrix step = oracle::circuit_unitary(trotter_circuit(hs, out.tau, 1));
    const Matrix u_dt = detail::nearest_unitary(detail::matrix_power(step, r));
    Matrix u_t = Matrix::Identity(step.rows(), step.cols());
    for (std::size_t k = 0; k < out.grid.size(); ++k) {
      u_t = detail::nearest_unitary(u_dt * u_t);
      evolutions.push_back(std::exp(Complex(0.0, centre * out.grid[k])) * u_t);
    }
  }

  const Index dim = a.rows();
  out.moments.resize(dim);
  parallel_for(static_cast<std::size_t>(dim), [&](std::size_t k) {
    const Vector v = eig.vectors.col(static_cast<Index>(k));
    std::vector<Complex> f;
    for (const auto& u : evolutions) f.push_back(hadamard_test(u, v).value);
    out.moments[k] = extract_moments(f, out.grid, out.fit_order);
    out.moments[k].label = static_cast<Index>(k);
  });

  double value = 0.0, z = 0.0;
  for (Index k = 0; k < dim; ++k) {
    const auto& m = out.moments[k].moments;
    double series = 0.0, coef = 1.0;
    for (int n = 0; n < out.s; ++n) {
      series += coef * m(n);
      coef *= -job.beta / (n + 1.0);
    }
    value += eig.values(k) * series;
    z += series;
    out.max_condition = std::max(out.max_condition, out.moments[k].condition);
    }
  out.value = job.normalized ? value / z : value * rescale;
  return out;
}

struct EntropyResult {
  double value = 0.0;
  std::vector<double> terms;
  double normalization = 0.0;
};

/// S = sum_r Tr(H_r e^{-H}) for rho = e^{-H}.
inline EntropyResult entropy(const LocalHamiltonian& h_mod, double eps = 1e-3,
                             TimeEvolution evolution = TimeEvolution::exact) {
  validate(h_mod);
  if (h_mod.terms.empty()) throw Error(ErrorKind::invalid_argument, "modular Hamiltonian has no terms");
  EntropyResult out;
  out.normalization = matrix_exp(dense(h_mod), -1.0).trace().real();
  if (std::abs(out.normalization - 1.0) > 1e-6)
    throw Error(ErrorKind::invalid_state,
                detail::cat("not a modular Hamiltonian: Tr e^{-H} = ", out.normalization));
  for (const auto& t : h_mod.terms) {
    ThermalJob job;
    job.observable = embed_term(h_mod, t);
    job.hamiltonian = h_mod;
    job.beta = 1.0;
    job.epsilon = eps / static_cast<double>(h_mod.terms.size());
    job.evolution = evolution;
    out.terms.push_back(thermal_value(job).value);
    out.value += out.terms.back();
  }
  return out;
}

/// Hamiltonian with e^{-H} = rho (a single term on all sites).
inline LocalHamiltonian modular_hamiltonian(const Matrix& rho, Index phys_dim = 2) {
  if (!is_density_matrix(rho)) throw Error(ErrorKind::invalid_state, "modular_hamiltonian needs a density matrix");
  const auto e = eigh(rho);
  if (e.values.minCoeff() <= 0.0) throw Error(ErrorKind::invalid_state, "modular_hamiltonian needs a full-rank state");
  int n = 0;
  Index dim = 1;
  while (dim < rho.rows()) {
    dim *= phys_dim;
    ++n;
  }
  if (dim != rho.rows()) throw Error(ErrorKind::dimension_mismatch, "state dimension is not a power of the site dimension");
  RealVector logs = -e.values.array().log();
  Matrix hm = e.vectors * logs.cast<Complex>().asDiagonal() * e.vectors.adjoint();
  hm = 0.5 * (hm + hm.adjoint()).eval();
  LocalHamiltonian out{n, phys_dim, {}};
  std::vector<int> support(n);
  for (int k = 0; k < n; ++k) support[k] = k;
  out.terms.push_back({support, hm});
  return out;
}

// ---------------------------------------------------------------------------
// Reflections and transition amplitudes

struct Reflection {
  Matrix r;  // 1 - 2|psi><psi|
  Matrix u;  // U|0> = psi
};

inline Reflection reflection(const Vector& psi) {
  if (psi.size() == 0 || psi.norm() < 1e-300) throw Error(ErrorKind::invalid_state, "reflection of a zero vector");
  detail::require_state(psi, "reflection: psi");
  const Index d = psi.size();
  const Matrix one = Matrix::Identity(d, d);
  Reflection out;
  out.r = one - 2.0 * projector(psi);
  // Householder map of e^{i theta}|0> onto psi, times e^{i theta}
  const Complex phase = std::abs(psi(0)) > 0.0 ? psi(0) / std::abs(psi(0)) : Complex(1.0, 0.0);
  Vector w = phase * basis_vector(d, 0) - psi;
  const double wn = w.squaredNorm();
  const Matrix house = wn > 1e-28 ? Matrix(one - 2.0 * w * w.adjoint() / wn) : one;
  out.u = phase * house;
  return out;
}

struct TransitionEstimate {
  AmplitudeEstimate amplitude;
  Index reference = 0;
};

inline constexpr double kReferenceOverlap = 1e-3;

/// <phi|U|psi> = (X + W - Y - Z) / (4 <b|phi> <psi|b>) with X = <b|R_phi U R_psi|b>,
/// Y = <b|R_phi U|b>, Z = <b|U R_psi|b>, W = <b|U|b>.
inline TransitionEstimate transition_amplitude(const Vector& phi, const Matrix& u, const Vector& psi,
                                               const EstimatorMode& mode = EstimatorMode::exact()) {
  detail::require_state(phi, "transition_amplitude: phi");
  detail::require_state(psi, "transition_amplitude: psi");
  detail::require_unitary(u, "transition_amplitude: U");
  const Index d = u.rows();
  if (phi.size() != d || psi.size() != d) throw Error(ErrorKind::dimension_mismatch, "transition_amplitude: dimensions differ");
  Index b = -1;
  for (Index k = 0; k < d; ++k)
    if (std::abs(phi(k)) >= kReferenceOverlap && std::abs(psi(k)) >= kReferenceOverlap) {
      b = k;
      break;
    }
  if (b < 0)
    throw Error(ErrorKind::degenerate_reference,
                "no computational basis state overlaps both phi and psi by at least 1e-3");
  const Matrix rp = reflection(phi).r, rs = reflection(psi).r;
  const Vector e = basis_vector(d, b);
  auto sub = [&](const Matrix& w, std::uint64_t k) {
    EstimatorMode m = mode;
    if (!mode.is_exact()) m.seed = derive_seed(mode.seed, k);
    return hadamard_test(w, e, m);
  };
  const auto x = sub(rp * u * rs, 0), y = sub(rp * u, 1), z = sub(u * rs, 2), w = sub(u, 3);
  const Complex denom = 4.0 * phi(b) * std::conj(psi(b));  // 4 <b|phi> <psi|b>
  TransitionEstimate out;
  out.reference = b;
  out.amplitude.value = (x.value + w.value - y.value - z.value) / denom;
  out.amplitude.stderr_ = std::sqrt(x.stderr_ * x.stderr_ + y.stderr_ * y.stderr_ + z.stderr_ * z.stderr_ +
                                    w.stderr_ * w.stderr_) / std::abs(denom);
  out.amplitude.shots = x.shots + y.shots + z.shots + w.shots;
  return out;
}

struct UnitaryDecomposition {
  double shift = 0.0;
  double scale = 1.0;
  Matrix u_plus, u_minus;
};

/// A = scale (U_+ + U_-) + shift 1 with U_+- = B +- i sqrt(1 - B^dag B), B = (A - shift) / (2 scale).
inline UnitaryDecomposition unitary_decompose(const Matrix& a) {
  require_square(a, "unitary_decompose");
  if (!is_hermitian(a)) throw Error(ErrorKind::not_hermitian, "unitary_decompose accepts Hermitian matrices only");
  const Index d = a.rows();
  const Matrix one = Matrix::Identity(d, d);
  UnitaryDecomposition out;
  out.shift = a.trace().real() / static_cast<double>(d);
  const Matrix a0 = a - out.shift * one;
  out.scale = std::max(1.0, operator_norm(a0) / 2.0);
  Matrix bm = a0 / (2.0 * out.scale);
  bm = 0.5 * (bm + bm.adjoint()).eval();
  // B and C share eigenvectors, so U_+- = V diag(b +- i sqrt(1 - b^2)) V^dagger
  const auto eb = eigh(bm);
  Vector plus(d), minus(d);
  for (Index k = 0; k < d; ++k) {
    const double b = std::clamp(eb.values(k), -1.0, 1.0);
    const double c = std::sqrt(std::max(0.0, 1.0 - b * b));
    plus(k) = Complex(b, c);
    minus(k) = Complex(b, -c);
  }
  out.u_plus = eb.vectors * plus.asDiagonal() * eb.vectors.adjoint();
  out.u_minus = eb.vectors * minus.asDiagonal() * eb.vectors.adjoint();
  return out;
}

/// <phi|A|psi> for Hermitian A through unitary_decompose and three transition amplitudes.
inline AmplitudeEstimate general_matrix_element(const Vector& phi, const Matrix& a, const Vector& psi,
                                                const EstimatorMode& mode = EstimatorMode::exact()) {
  const auto dec = unitary_decompose(a);
  auto sub = [&](const Matrix& u, std::uint64_t k) {
    EstimatorMode m = mode;
    if (!mode.is_exact()) m.seed = derive_seed(mode.seed, k);
    return transition_amplitude(phi, u, psi, m).amplitude;
  };
  const Index d = a.rows();
  const auto p = sub(dec.u_plus, 0), m = sub(dec.u_minus, 1), o = sub(Matrix::Identity(d, d), 2);
  AmplitudeEstimate out;
  out.value = dec.scale * (p.value + m.value) + dec.shift * o.value;
  out.stderr_ = std::sqrt(dec.scale * dec.scale * (p.stderr_ * p.stderr_ + m.stderr_ * m.stderr_) +
                          dec.shift * dec.shift * o.stderr_ * o.stderr_);
  out.shots = p.shots + m.shots + o.shots;
  return out;
}

}  // namespace epsim
