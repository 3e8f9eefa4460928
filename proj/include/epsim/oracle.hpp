#pragma once

// Brute-force reference implementations: dense statevectors, density matrices and
// exhaustive enumeration of measurement branches.

#include <cstdint>
#include <span>

#include "epsim/channels.hpp"
#include "epsim/circuit.hpp"
#include "epsim/tensor.hpp"

namespace epsim::oracle {

inline constexpr Index kMaxStateDim = Index{1} << 14;
inline constexpr Index kMaxUnitaryDim = Index{1} << 12;
inline constexpr std::size_t kMaxBranches = std::size_t{1} << 20;
inline constexpr Index kMaxDensityDim = Index{1} << 12;

inline void guard_dim(Index dim, Index limit, const char* what) {
  if (dim > limit)
    throw Error(ErrorKind::size_guard, detail::cat(what, ": dimension ", dim, " exceeds the limit ", limit));
}

struct DenseState {
  std::vector<Index> dims;
  Vector amplitudes;
};

inline DenseState basis_state(std::vector<Index> dims, std::span<const Index> digits) {
  if (digits.size() != dims.size()) throw Error(ErrorKind::dimension_mismatch, "basis_state: one digit per site");
  const Index total = product(dims);
  guard_dim(total, kMaxStateDim, "basis_state");
  Index k = 0;
  for (std::size_t n = 0; n < dims.size(); ++n) k = k * dims[n] + digits[n];
  return {std::move(dims), basis_vector(total, k)};
}

/// Precomputed index bookkeeping for an operator acting on a subset of legs.
class LegMap {
 public:
  LegMap(std::span<const Index> dims, std::span<const int> targets) {
    detail::check_legs(dims, targets);
    std::vector<Index> tdims;
    for (int t : targets) tdims.push_back(dims[t]);
    sub_ = product(tdims);
    const Index total = product(dims);
    const auto strides = detail::strides_of(dims);
    const auto sub_strides = detail::strides_of(tdims);
    offset_.assign(sub_, 0);
    for (Index s = 0; s < sub_; ++s)
      for (std::size_t k = 0; k < targets.size(); ++k)
        offset_[s] += ((s / sub_strides[k]) % tdims[k]) * strides[targets[k]];
    base_.resize(total);
    digit_.resize(total);
    for (Index f = 0; f < total; ++f) {
      Index s = 0, base = f;
      for (std::size_t k = 0; k < targets.size(); ++k) {
        const Index digit = (f / strides[targets[k]]) % dims[targets[k]];
        s += digit * sub_strides[k];
        base -= digit * strides[targets[k]];
      }
      base_[f] = base;
      digit_[f] = s;
    }
  }

  Index sub_dim() const { return sub_; }

  /// op acting on the target legs of v.
  Vector apply(const Matrix& op, const Vector& v) const {
    if (op.rows() != sub_ || op.cols() != sub_)
      throw Error(ErrorKind::dimension_mismatch, detail::cat("local operator must be ", sub_, "x", sub_));
    Vector out = Vector::Zero(v.size());
    for (Index f = 0; f < v.size(); ++f) {
      const Complex x = v(f);
      if (x == Complex{}) continue;
      const Index base = base_[f], col = digit_[f];
      for (Index r = 0; r < sub_; ++r) out(base + offset_[r]) += op(r, col) * x;
    }
    return out;
  }

  /// op rho op^dagger with op on the target legs.
  Matrix conjugate(const Matrix& op, const Matrix& rho) const {
    Matrix half(rho.rows(), rho.cols());
    for (Index c = 0; c < rho.cols(); ++c) half.col(c) = apply(op, rho.col(c));
    Matrix out(rho.rows(), rho.cols());
    const Matrix opc = op.conjugate();
    for (Index r = 0; r < rho.rows(); ++r) out.row(r) = apply(opc, half.row(r).transpose()).transpose();
    return out;
  }

 private:
  Index sub_ = 1;
  std::vector<Index> offset_;
  std::vector<Index> base_;
  std::vector<Index> digit_;
};

inline Vector apply_local(const Vector& v, std::span<const Index> dims, std::span<const int> targets,
                          const Matrix& op) {
  if (v.size() != product(dims)) throw Error(ErrorKind::dimension_mismatch, "apply_local: state size vs dims");
  return LegMap(dims, targets).apply(op, v);
}

inline DenseState apply_circuit(const DenseState& state, const BrickworkCircuit& circuit) {
  validate(circuit);
  if (static_cast<int>(state.dims.size()) != circuit.n_sites)
    throw Error(ErrorKind::dimension_mismatch, "apply_circuit: site count mismatch");
  for (Index d : state.dims)
    if (d != circuit.phys_dim) throw Error(ErrorKind::dimension_mismatch, "apply_circuit: physical dim mismatch");
  guard_dim(state.amplitudes.size(), kMaxStateDim, "apply_circuit");
  DenseState out = state;
  for (const auto& layer : circuit.layers)
    for (const auto& g : layer) {
      const std::array<int, 2> t{g.site, g.site + 1};
      out.amplitudes = apply_local(out.amplitudes, out.dims, t, g.u);
    }
  return out;
}

/// Dense unitary of the whole circuit.
inline Matrix circuit_unitary(const BrickworkCircuit& circuit) {
  validate(circuit);
  const std::vector<Index> dims(circuit.n_sites, circuit.phys_dim);
  const Index total = product(dims);
  guard_dim(total, kMaxUnitaryDim, "circuit_unitary");
  Matrix u = Matrix::Identity(total, total);
  for (const auto& layer : circuit.layers)
    for (const auto& g : layer) {
      const std::array<int, 2> t{g.site, g.site + 1};
      const LegMap map(dims, t);
      for (Index c = 0; c < total; ++c) u.col(c) = map.apply(g.u, u.col(c));
    }
  return u;
}

using SiteOps = std::vector<std::pair<int, Matrix>>;

inline Complex expectation(const DenseState& state, const SiteOps& ops) {
  guard_dim(state.amplitudes.size(), kMaxStateDim, "expectation");
  Vector w = state.amplitudes;
  for (const auto& [site, op] : ops) {
    if (site < 0 || site >= static_cast<int>(state.dims.size()))
      throw Error(ErrorKind::dimension_mismatch, detail::cat("expectation: site ", site, " out of range"));
    const std::array<int, 1> t{site};
    w = apply_local(w, state.dims, t, op);
  }
  return state.amplitudes.dot(w);
}

inline Complex expectation(const Matrix& rho, std::span<const Index> dims, const SiteOps& ops) {
  guard_dim(rho.rows(), kMaxStateDim, "expectation");
  Matrix w = rho;
  for (const auto& [site, op] : ops) {
    const std::array<int, 1> t{site};
    const LegMap map(dims, t);
    for (Index c = 0; c < w.cols(); ++c) w.col(c) = map.apply(op, w.col(c));
  }
  return w.trace();
}

/// Tr(A exp(-beta H)); unnormalized.
inline double thermal_exact(const Matrix& a, const Matrix& h, double beta) {
  guard_dim(h.rows(), kMaxUnitaryDim, "thermal_exact");
  if (!is_hermitian(h)) throw Error(ErrorKind::not_hermitian, "thermal_exact: H must be Hermitian");
  if (a.rows() != h.rows() || a.cols() != h.cols())
    throw Error(ErrorKind::dimension_mismatch, "thermal_exact: A and H must share dims");
  return (a * matrix_exp(h, Complex(-beta, 0.0))).trace().real();
}

/// Same quantity by summing the Taylor series of exp(-beta H) until terms drop below tol.
inline double thermal_taylor(const Matrix& a, const Matrix& h, double beta, double tol = 1e-16) {
  guard_dim(h.rows(), kMaxUnitaryDim, "thermal_taylor");
  Matrix term = Matrix::Identity(h.rows(), h.cols());
  Matrix sum = term;
  for (int n = 1; n < 2000; ++n) {
    term = (term * h) * (-beta / n);
    sum += term;
    if (term.cwiseAbs().maxCoeff() < tol * std::max(1.0, sum.cwiseAbs().maxCoeff())) break;
  }
  return (a * sum).trace().real();
}

/// -Tr(rho log rho).
inline double entropy_exact(const Matrix& rho) {
  guard_dim(rho.rows(), kMaxUnitaryDim, "entropy_exact");
  const auto eig = eigh(rho);
  double s = 0.0;
  for (Index k = 0; k < eig.values.size(); ++k) {
    const double p = eig.values(k);
    if (p > 1e-300) s -= p * std::log(p);
  }
  return s;
}

inline Complex amplitude_exact(const Vector& phi, const Matrix& u, const Vector& psi) {
  if (u.rows() != phi.size() || u.cols() != psi.size())
    throw Error(ErrorKind::dimension_mismatch, "amplitude_exact: operator vs state dims");
  return phi.dot(u * psi);
}

// ---------------------------------------------------------------------------
// Exhaustive branch simulation

struct BranchStep {
  enum class Kind { measure, discard, apply };
  Kind kind = Kind::apply;
  std::vector<int> legs;  // leg ids
  BinaryMeasurement measurement;
  Matrix op;

  static BranchStep measure(std::vector<int> legs, BinaryMeasurement m) {
    return {Kind::measure, std::move(legs), std::move(m), {}};
  }
  static BranchStep discard(std::vector<int> legs) { return {Kind::discard, std::move(legs), {}, {}}; }
  static BranchStep apply(std::vector<int> legs, Matrix op) { return {Kind::apply, std::move(legs), {}, std::move(op)}; }
};

struct BranchPlan {
  std::vector<Index> leg_dims;  // leg id k has dimension leg_dims[k]
  Matrix initial;               // density matrix on all legs, leg 0 major
  std::vector<BranchStep> steps;
};

struct Branch {
  std::vector<int> outcomes;  // one entry per measure step, in order
  double probability = 0.0;
  Matrix state;               // unnormalized, trace = probability
  std::vector<int> legs;      // remaining leg ids, major first
  std::vector<Index> dims;
};

namespace internal {
inline std::vector<int> positions_of(const std::vector<int>& present, const std::vector<int>& wanted) {
  std::vector<int> pos;
  for (int leg : wanted) {
    const auto it = std::find(present.begin(), present.end(), leg);
    if (it == present.end()) throw Error(ErrorKind::invalid_argument, detail::cat("leg ", leg, " is not present"));
    pos.push_back(static_cast<int>(it - present.begin()));
  }
  return pos;
}
}  // namespace internal

/// Runs every branch of the plan and returns them with exact probabilities.
inline std::vector<Branch> channel_branch_simulate(const BranchPlan& plan) {
  std::size_t n_measure = 0;
  for (const auto& s : plan.steps) n_measure += s.kind == BranchStep::Kind::measure;
  if (n_measure >= 64 || (std::size_t{1} << n_measure) > kMaxBranches)
    throw Error(ErrorKind::size_guard, detail::cat("branch simulation: 2^", n_measure, " branches exceed 2^20"));
  const Index total = product(plan.leg_dims);
  if (plan.initial.rows() != total || plan.initial.cols() != total)
    throw Error(ErrorKind::dimension_mismatch, "branch simulation: initial state does not match leg dims");
  guard_dim(total, kMaxDensityDim, "branch simulation");

  Branch root;
  root.probability = plan.initial.trace().real();
  root.state = plan.initial;
  for (int k = 0; k < static_cast<int>(plan.leg_dims.size()); ++k) root.legs.push_back(k);
  root.dims = plan.leg_dims;
  std::vector<Branch> live{root};

  for (const auto& step : plan.steps) {
    std::vector<Branch> next;
    for (auto& b : live) {
      const auto pos = internal::positions_of(b.legs, step.legs);
      switch (step.kind) {
        case BranchStep::Kind::apply: {
          b.state = LegMap(b.dims, pos).conjugate(step.op, b.state);
          b.probability = b.state.trace().real();
          next.push_back(std::move(b));
          break;
        }
        case BranchStep::Kind::discard: {
          std::vector<int> keep_pos, keep_legs;
          std::vector<Index> keep_dims;
          for (int p = 0; p < static_cast<int>(b.legs.size()); ++p)
            if (std::find(pos.begin(), pos.end(), p) == pos.end()) {
              keep_pos.push_back(p);
              keep_legs.push_back(b.legs[p]);
              keep_dims.push_back(b.dims[p]);
            }
          b.state = partial_trace(b.state, b.dims, keep_pos);
          b.legs = std::move(keep_legs);
          b.dims = std::move(keep_dims);
          next.push_back(std::move(b));
          break;
        }
        case BranchStep::Kind::measure: {
          const LegMap map(b.dims, pos);
          for (int outcome = 0; outcome < 2; ++outcome) {
            Branch c;
            c.outcomes = b.outcomes;
            c.outcomes.push_back(outcome);
            c.state = map.conjugate(outcome == 0 ? step.measurement.m0 : step.measurement.m1, b.state);
            c.probability = c.state.trace().real();
            c.legs = b.legs;
            c.dims = b.dims;
            next.push_back(std::move(c));
          }
          break;
        }
      }
    }
    live = std::move(next);
  }
  return live;
}

/// tr(op sigma) for an operator on the given remaining legs (in that order).
inline Complex branch_expectation(const Branch& b, const std::vector<int>& legs, const Matrix& op) {
  const auto pos = internal::positions_of(b.legs, legs);
  const LegMap map(b.dims, pos);
  Complex acc{};
  for (Index c = 0; c < b.state.cols(); ++c) acc += map.apply(op, b.state.col(c))(c);
  return acc;
}

}  // namespace epsim::oracle
