#pragma once

// Local Hamiltonians H = sum_r H_r, standard spin models and first-order Trotter circuits.
//
// Model conventions (open chains, Pauli matrices without factors of 1/2):
//   TFIM:        H = -J sum_n Z_n Z_{n+1} - h sum_n X_n
//   Heisenberg:  H =  J sum_n (X_n X_{n+1} + Y_n Y_{n+1} + Z_n Z_{n+1})

#include "epsim/circuit.hpp"
#include "epsim/tensor.hpp"

namespace epsim {

struct HamiltonianTerm {
  std::vector<int> support;
  Matrix matrix;
};

struct LocalHamiltonian {
  int n_sites = 0;
  Index phys_dim = 2;
  std::vector<HamiltonianTerm> terms;

  Index dim() const {
    Index total = 1;
    for (int n = 0; n < n_sites; ++n) total *= phys_dim;
    return total;
  }
};

inline constexpr std::size_t kMaxTerms = 10000;
inline constexpr Index kMaxDenseHamiltonian = Index{1} << 12;

inline void validate(const LocalHamiltonian& h, double tol = Tolerance::equality) {
  if (h.n_sites < 1) throw Error(ErrorKind::invalid_argument, "Hamiltonian needs at least one site");
  if (h.terms.size() > kMaxTerms)
    throw Error(ErrorKind::size_guard, detail::cat(h.terms.size(), " terms exceed the limit ", kMaxTerms));
  for (std::size_t r = 0; r < h.terms.size(); ++r) {
    const auto& t = h.terms[r];
    if (t.support.empty()) throw Error(ErrorKind::invalid_argument, detail::cat("term ", r, " has empty support"));
    std::vector<int> sorted = t.support;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw Error(ErrorKind::invalid_argument, detail::cat("term ", r, " repeats a site"));
    if (sorted.front() < 0 || sorted.back() >= h.n_sites)
      throw Error(ErrorKind::dimension_mismatch, detail::cat("term ", r, " support out of range"));
    Index sub = 1;
    for (std::size_t k = 0; k < t.support.size(); ++k) sub *= h.phys_dim;
    if (t.matrix.rows() != sub || t.matrix.cols() != sub)
      throw Error(ErrorKind::dimension_mismatch, detail::cat("term ", r, " matrix must be ", sub, "x", sub));
    if (!is_hermitian(t.matrix, tol)) throw Error(ErrorKind::not_hermitian, detail::cat("term ", r, " is not Hermitian"));
  }
}

inline Matrix embed_term(const LocalHamiltonian& h, const HamiltonianTerm& t) {
  const std::vector<Index> dims(h.n_sites, h.phys_dim);
  return embed(t.matrix, t.support, dims);
}

inline Matrix dense(const LocalHamiltonian& h) {
  validate(h);
  const Index total = h.dim();
  if (total > kMaxDenseHamiltonian)
    throw Error(ErrorKind::size_guard, detail::cat("dense Hamiltonian of dimension ", total, " exceeds 2^12"));
  Matrix out = Matrix::Zero(total, total);
  for (const auto& t : h.terms) out += embed_term(h, t);
  return out;
}

/// sum_r ||H_r||, an upper bound on ||H||.
inline double norm_bound(const LocalHamiltonian& h) {
  double s = 0.0;
  for (const auto& t : h.terms) s += operator_norm(t.matrix);
  return s;
}

/// tr(H) / dim, computed term by term.
inline double trace_shift(const LocalHamiltonian& h) {
  double c = 0.0;
  for (const auto& t : h.terms) c += t.matrix.trace().real() / static_cast<double>(t.matrix.rows());
  return c;
}

/// H - (tr(H) / dim) 1, with the identity part removed from every term.
inline LocalHamiltonian traceless(const LocalHamiltonian& h) {
  LocalHamiltonian out = h;
  for (auto& t : out.terms) {
    const Index n = t.matrix.rows();
    t.matrix -= (t.matrix.trace() / static_cast<double>(n)) * Matrix::Identity(n, n);
  }
  return out;
}

inline LocalHamiltonian build_tfim(int n_sites, double j, double h) {
  if (n_sites < 2) throw Error(ErrorKind::invalid_argument, "build_tfim needs N >= 2");
  LocalHamiltonian out{n_sites, 2, {}};
  const Matrix zz = kron(gates::pauli_z(), gates::pauli_z());
  for (int n = 0; n + 1 < n_sites; ++n)
    if (j != 0.0) out.terms.push_back({{n, n + 1}, -j * zz});
  for (int n = 0; n < n_sites; ++n)
    if (h != 0.0) out.terms.push_back({{n}, -h * gates::pauli_x()});
  return out;
}

inline LocalHamiltonian build_heisenberg(int n_sites, double j) {
  if (n_sites < 2) throw Error(ErrorKind::invalid_argument, "build_heisenberg needs N >= 2");
  LocalHamiltonian out{n_sites, 2, {}};
  const Matrix xyz = kron(gates::pauli_x(), gates::pauli_x()) + kron(gates::pauli_y(), gates::pauli_y()) +
                     kron(gates::pauli_z(), gates::pauli_z());
  for (int n = 0; n + 1 < n_sites; ++n) out.terms.push_back({{n, n + 1}, j * xyz});
  return out;
}

inline Matrix exact_unitary(const LocalHamiltonian& h, double t) {
  return matrix_exp(dense(h), Complex(0.0, -t));
}

// ---------------------------------------------------------------------------
// Trotter compilation

struct TrotterPlan {
  double tau = 0.0;
  int repetitions = 0;
  int order = 1;
  std::vector<int> bond_order;  // bonds (n, n + 1) in application order within one step
};

/// Merges every term into nearest-neighbour bond terms h_n on (n, n + 1). A single-site term
/// is shared equally among the bonds that contain its site.
inline std::vector<Matrix> bond_terms(const LocalHamiltonian& h) {
  validate(h);
  if (h.n_sites < 2) throw Error(ErrorKind::invalid_argument, "Trotter circuits need at least two sites");
  const Index d = h.phys_dim;
  const Matrix one = Matrix::Identity(d, d);
  std::vector<Matrix> bonds(h.n_sites - 1, Matrix::Zero(d * d, d * d));
  for (const auto& t : h.terms) {
    if (t.support.size() == 1) {
      const int s = t.support[0];
      std::vector<int> owners;
      if (s - 1 >= 0) owners.push_back(s - 1);
      if (s + 1 < h.n_sites) owners.push_back(s);
      for (int b : owners) {
        const Matrix local = b == s ? kron(t.matrix, one) : kron(one, t.matrix);
        bonds[b] += local / static_cast<double>(owners.size());
      }
    } else if (t.support.size() == 2 && std::abs(t.support[0] - t.support[1]) == 1) {
      const int b = std::min(t.support[0], t.support[1]);
      if (t.support[0] < t.support[1]) {
        bonds[b] += t.matrix;
      } else {
        const Matrix sw = gates::swap(d);
        bonds[b] += sw * t.matrix * sw;
      }
    } else {
      throw Error(ErrorKind::invalid_argument, "Trotter circuits accept only one-site and nearest-neighbour terms");
    }
  }
  return bonds;
}

inline TrotterPlan trotter_plan(const LocalHamiltonian& h, double t, int repetitions) {
  if (repetitions < 1) throw Error(ErrorKind::invalid_argument, "Trotter repetitions must be positive");
  TrotterPlan p{t / repetitions, repetitions, 1, {}};
  for (int b = 0; b + 1 < h.n_sites; b += 2) p.bond_order.push_back(b);
  for (int b = 1; b + 1 < h.n_sites; b += 2) p.bond_order.push_back(b);
  return p;
}

/// (prod_bonds exp(-i tau h_b))^R with tau = t / R; each step is an even-bond layer followed
/// by an odd-bond layer.
inline BrickworkCircuit trotter_circuit(const LocalHamiltonian& h, double t, int repetitions) {
  const auto bonds = bond_terms(h);
  BrickworkCircuit c{h.n_sites, h.phys_dim, {}};
  if (t == 0.0) return c;
  const auto plan = trotter_plan(h, t, repetitions);
  std::vector<Matrix> step_gates;
  for (const auto& hb : bonds) step_gates.push_back(matrix_exp(hb, Complex(0.0, -plan.tau)));
  for (int r = 0; r < repetitions; ++r)
    for (int parity = 0; parity < 2; ++parity) {
      std::vector<Gate> layer;
      for (int b = parity; b + 1 < h.n_sites; b += 2) layer.push_back({b, step_gates[b]});
      if (!layer.empty()) c.layers.push_back(std::move(layer));
    }
  return c;
}

/// sum over ordered bond pairs a < b of ||[h_a, h_b]||, computed on the three sites involved.
inline double commutator_bound(const LocalHamiltonian& h) {
  const auto bonds = bond_terms(h);
  const Index d = h.phys_dim;
  const Matrix one = Matrix::Identity(d, d);
  double total = 0.0;
  for (std::size_t a = 0; a + 1 < bonds.size(); ++a) {
    const Matrix ha = kron(bonds[a], one), hb = kron(one, bonds[a + 1]);
    total += operator_norm(ha * hb - hb * ha);
  }
  return total;
}

}  // namespace epsim
