#pragma once

// Brickwork circuits: layers of disjoint nearest-neighbour two-site gates.
// Sites are 0-based; a gate at `site` n acts on (n, n + 1) with n the major factor.

#include "epsim/random.hpp"
#include "epsim/tensor.hpp"

namespace epsim {

struct Gate {
  int site = 0;
  Matrix u;
};

struct BrickworkCircuit {
  int n_sites = 0;
  Index phys_dim = 2;
  std::vector<std::vector<Gate>> layers;

  std::size_t gate_count() const {
    std::size_t m = 0;
    for (const auto& layer : layers) m += layer.size();
    return m;
  }
  std::size_t depth() const { return layers.size(); }
};

inline void validate(const BrickworkCircuit& c, double tol = Tolerance::equality) {
  if (c.n_sites < 1) throw Error(ErrorKind::invalid_argument, "circuit needs at least one site");
  if (c.phys_dim < 1) throw Error(ErrorKind::invalid_argument, "circuit phys_dim must be positive");
  const Index dd = c.phys_dim * c.phys_dim;
  for (std::size_t l = 0; l < c.layers.size(); ++l) {
    std::vector<bool> used(c.n_sites, false);
    for (const auto& g : c.layers[l]) {
      if (g.site < 0 || g.site + 1 >= c.n_sites)
        throw Error(ErrorKind::dimension_mismatch, detail::cat("layer ", l, ": gate site ", g.site, " out of range"));
      if (g.u.rows() != dd || g.u.cols() != dd)
        throw Error(ErrorKind::dimension_mismatch, detail::cat("layer ", l, ": gate must be ", dd, "x", dd));
      if (!is_unitary(g.u, tol))
        throw Error(ErrorKind::not_unitary, detail::cat("layer ", l, ": gate at site ", g.site, " is not unitary"));
      if (used[g.site] || used[g.site + 1])
        throw Error(ErrorKind::invalid_argument, detail::cat("layer ", l, ": overlapping gate supports"));
      used[g.site] = used[g.site + 1] = true;
    }
  }
}

/// Full brickwork: layer l holds gates on every bond with parity l % 2.
inline BrickworkCircuit random_brickwork(int n_sites, int n_layers, Index d, Rng& rng) {
  BrickworkCircuit c{n_sites, d, {}};
  for (int l = 0; l < n_layers; ++l) {
    std::vector<Gate> layer;
    for (int n = l % 2; n + 1 < n_sites; n += 2) layer.push_back({n, random_unitary(d * d, rng)});
    c.layers.push_back(std::move(layer));
  }
  return c;
}

namespace gates {
inline Matrix pauli_x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline Matrix pauli_y() {
  Matrix m(2, 2);
  m << 0, -kI, kI, 0;
  return m;
}
inline Matrix pauli_z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
inline Matrix hadamard() {
  Matrix m(2, 2);
  m << 1, 1, 1, -1;
  return m / std::sqrt(2.0);
}
inline Matrix cnot() {
  Matrix m = Matrix::Zero(4, 4);
  m(0, 0) = m(1, 1) = m(2, 3) = m(3, 2) = 1.0;
  return m;
}
inline Matrix swap(Index d = 2) {
  Matrix m = Matrix::Zero(d * d, d * d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) m(j * d + i, i * d + j) = 1.0;
  return m;
}
inline Matrix pauli(int k) {
  switch (k) {
    case 0: return Matrix::Identity(2, 2);
    case 1: return pauli_x();
    case 2: return pauli_y();
    case 3: return pauli_z();
  }
  throw Error(ErrorKind::invalid_argument, detail::cat("no Pauli with index ", k));
}
}  // namespace gates

}  // namespace epsim
