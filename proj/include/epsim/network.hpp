#pragma once

// Channel networks for <psi| U^dagger (O_1 x ... x O_N) U |psi>.
//
// The ket layer holds the MPS row (boundary node plus one node per site) followed by the
// gate rows. Every two-site gate is split by an operator-Schmidt decomposition into a left
// and a right half joined by a horizontal bond. Physical legs between rows are vertical
// wires; in the heralded picture each is a Bell projection |omega><omega|. The open legs at
// the top meet the observable projectors (or trace caps) at the interface with the
// conjugate layer, which is the complex conjugate of the ket layer and is not stored.

#include <map>
#include <optional>

#include "epsim/channels.hpp"
#include "epsim/circuit.hpp"
#include "epsim/mps.hpp"
#include "epsim/oracle.hpp"
#include "epsim/parallel.hpp"
#include "epsim/random.hpp"
#include "epsim/tensor_network.hpp"

namespace epsim {

// ---------------------------------------------------------------------------
// Gate compilation

/// Half of a split gate: Kraus-like operators normalized to sum_k tr(K_k^dagger K_k) = d,
/// and the scalar weight that restores the raw half (raw_k = weight * K_k).
struct GateHalf {
  std::vector<Matrix> kraus;
  double weight = 1.0;
};

struct GateChannelPair {
  GateHalf left;
  GateHalf right;
  Index bond_dim = 0;
  Matrix gate;
};

/// u = sum_k (w_L L_k) (x) (w_R R_k).
inline Matrix recombine(const GateChannelPair& p) {
  const Index d = p.left.kraus.front().rows();
  Matrix u = Matrix::Zero(d * d, d * d);
  for (Index k = 0; k < p.bond_dim; ++k) u += kron(p.left.kraus[k], p.right.kraus[k]);
  return p.left.weight * p.right.weight * u;
}

inline GateChannelPair compile_gate(const Matrix& u, double tol = Tolerance::equality) {
  require_square(u, "gate");
  if (!is_unitary(u, tol)) throw Error(ErrorKind::not_unitary, "compile_gate needs a unitary");
  const auto d = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(u.rows()))));
  if (d * d != u.rows()) throw Error(ErrorKind::dimension_mismatch, "gate dimension is not a square d^2");
  // m[(o1 i1), (o2 i2)] = u[(o1 o2), (i1 i2)]
  Matrix m(d * d, d * d);
  for (Index o1 = 0; o1 < d; ++o1)
    for (Index o2 = 0; o2 < d; ++o2)
      for (Index i1 = 0; i1 < d; ++i1)
        for (Index i2 = 0; i2 < d; ++i2) m(o1 * d + i1, o2 * d + i2) = u(o1 * d + o2, i1 * d + i2);
  const auto f = svd(m);
  Index rank = 0;
  while (rank < f.s.size() && f.s(rank) > 1e-12 * f.s(0)) ++rank;
  GateChannelPair pair;
  pair.gate = u;
  pair.bond_dim = rank;
  double total = 0.0;
  for (Index k = 0; k < rank; ++k) total += f.s(k);
  const double norm = std::sqrt(static_cast<double>(d) / total);
  for (Index k = 0; k < rank; ++k) {
    Matrix l(d, d), r(d, d);
    for (Index a = 0; a < d; ++a)
      for (Index b = 0; b < d; ++b) {
        l(a, b) = std::sqrt(f.s(k)) * f.u(a * d + b, k);
        r(a, b) = std::sqrt(f.s(k)) * std::conj(f.v(a * d + b, k));
      }
    pair.left.kraus.push_back(norm * l);
    pair.right.kraus.push_back(norm * r);
  }
  pair.left.weight = pair.right.weight = 1.0 / norm;
  return pair;
}

// ---------------------------------------------------------------------------
// Network types

enum class NodeKind { boundary, state, gate_left, gate_right, observable, cap };
enum class WireKind { horizontal, vertical, boundary, cap };

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::boundary: return "boundary";
    case NodeKind::state: return "state";
    case NodeKind::gate_left: return "gate_left";
    case NodeKind::gate_right: return "gate_right";
    case NodeKind::observable: return "observable";
    case NodeKind::cap: return "cap";
  }
  return "unknown";
}

inline const char* to_string(WireKind k) {
  switch (k) {
    case WireKind::horizontal: return "horizontal";
    case WireKind::vertical: return "vertical";
    case WireKind::boundary: return "boundary";
    case WireKind::cap: return "cap";
  }
  return "unknown";
}

struct NetworkNode {
  int id = 0;
  NodeKind kind = NodeKind::state;
  int site = 0;
  int layer = -1;  // -1 for the MPS row, circuit layer otherwise, L for the interface
  LabeledTensor tensor;
  bool computational() const { return kind != NodeKind::observable && kind != NodeKind::cap; }
};

struct Wire {
  int label = 0;
  WireKind kind = WireKind::vertical;
  Index dim = 1;
  int from = -1;  // node ids
  int to = -1;
};

/// Eigen-branches of a site observable, ascending eigenvalues with fixed phases.
struct ObservableBranches {
  int site = 0;
  RealVector values;
  Matrix vectors;
  Matrix op() const { return vectors * values.cast<Complex>().asDiagonal() * vectors.adjoint(); }
};

struct ChannelNetwork {
  int n_sites = 0;
  Index phys_dim = 2;
  std::vector<NetworkNode> nodes;
  std::vector<Wire> wires;
  std::vector<int> output_labels;  // open physical leg of each site at the interface
  std::vector<ObservableBranches> observables;
  bool conjugate_layer = true;

  MPS state;
  BrickworkCircuit circuit;
  SiteOperators operators;

  std::size_t count(WireKind k) const {
    return static_cast<std::size_t>(std::count_if(wires.begin(), wires.end(), [k](const Wire& w) { return w.kind == k; }));
  }
};

struct BuildOptions {
  bool require_canonical = true;
};

inline ChannelNetwork build_network(const MPS& psi, const BrickworkCircuit& circuit, const SiteOperators& ops,
                                    BuildOptions options = {}) {
  validate(psi);
  validate(circuit);
  if (psi.n_sites() != circuit.n_sites)
    throw Error(ErrorKind::dimension_mismatch,
                detail::cat("state has ", psi.n_sites(), " sites but the circuit has ", circuit.n_sites));
  for (int n = 0; n < psi.n_sites(); ++n)
    if (psi.phys_dim(n) != circuit.phys_dim)
      throw Error(ErrorKind::dimension_mismatch, detail::cat("site ", n, " physical dim differs from the circuit"));
  if (!psi.open_boundary()) throw Error(ErrorKind::invalid_argument, "networks are built for open boundary conditions");
  if (options.require_canonical && !is_left_canonical(psi))
    throw Error(ErrorKind::not_canonical, "build_network needs a left-canonical state; canonicalize first");

  ChannelNetwork net;
  net.n_sites = psi.n_sites();
  net.phys_dim = circuit.phys_dim;
  net.state = psi;
  net.circuit = circuit;
  net.operators = ops;
  const int n_sites = net.n_sites;
  const Index d = net.phys_dim;
  int next_label = 0;
  auto add_node = [&](NodeKind kind, int site, int layer, LabeledTensor t) {
    const int id = static_cast<int>(net.nodes.size());
    net.nodes.push_back({id, kind, site, layer, std::move(t)});
    return id;
  };

  std::vector<int> bond(n_sites + 1);
  for (auto& b : bond) b = next_label++;
  std::vector<int> phys(n_sites), producer(n_sites);

  {
    LabeledTensor t;
    t.labels = {bond[0], bond[n_sites]};
    t.dims = {psi.bond_dim(0), psi.bond_dim(n_sites)};
    t.data.resize(t.dims[0] * t.dims[1]);
    for (Index a = 0; a < t.dims[0]; ++a)
      for (Index b = 0; b < t.dims[1]; ++b) t.data(a * t.dims[1] + b) = psi.boundary(a, b);
    add_node(NodeKind::boundary, 0, -1, std::move(t));
  }
  std::vector<int> site_node(n_sites);
  for (int n = 0; n < n_sites; ++n) {
    const auto& ten = psi.tensors[n];
    phys[n] = next_label++;
    LabeledTensor t;
    const Index out = psi.bond_dim(n + 1), in = psi.bond_dim(n);
    t.labels = {bond[n + 1], phys[n], bond[n]};
    t.dims = {out, d, in};
    t.data.resize(out * d * in);
    for (Index o = 0; o < out; ++o)
      for (Index i = 0; i < d; ++i)
        for (Index a = 0; a < in; ++a) t.data((o * d + i) * in + a) = ten[i](o, a);
    site_node[n] = producer[n] = add_node(NodeKind::state, n, -1, std::move(t));
  }
  net.wires.push_back({bond[0], WireKind::boundary, psi.bond_dim(0), 0, site_node[0]});
  for (int n = 1; n < n_sites; ++n)
    net.wires.push_back({bond[n], WireKind::horizontal, psi.bond_dim(n), site_node[n - 1], site_node[n]});
  net.wires.push_back({bond[n_sites], WireKind::boundary, psi.bond_dim(n_sites), site_node[n_sites - 1], 0});

  for (std::size_t l = 0; l < circuit.layers.size(); ++l) {
    for (const auto& g : circuit.layers[l]) {
      const auto pair = compile_gate(g.u);
      const int n = g.site;
      const int k = next_label++;
      const int o1 = next_label++, o2 = next_label++;
      auto half_tensor = [&](const GateHalf& h, int out_label, int in_label) {
        LabeledTensor t;
        t.labels = {out_label, in_label, k};
        t.dims = {d, d, pair.bond_dim};
        t.data.resize(d * d * pair.bond_dim);
        for (Index o = 0; o < d; ++o)
          for (Index i = 0; i < d; ++i)
            for (Index b = 0; b < pair.bond_dim; ++b) t.data((o * d + i) * pair.bond_dim + b) = h.weight * h.kraus[b](o, i);
        return t;
      };
      const int left = add_node(NodeKind::gate_left, n, static_cast<int>(l), half_tensor(pair.left, o1, phys[n]));
      const int right = add_node(NodeKind::gate_right, n + 1, static_cast<int>(l), half_tensor(pair.right, o2, phys[n + 1]));
      net.wires.push_back({phys[n], WireKind::vertical, d, producer[n], left});
      net.wires.push_back({phys[n + 1], WireKind::vertical, d, producer[n + 1], right});
      net.wires.push_back({k, WireKind::horizontal, pair.bond_dim, left, right});
      phys[n] = o1;
      phys[n + 1] = o2;
      producer[n] = left;
      producer[n + 1] = right;
    }
  }

  std::vector<std::optional<Matrix>> per_site(n_sites);
  for (const auto& [site, o] : ops) {
    if (site < 0 || site >= n_sites) throw Error(ErrorKind::dimension_mismatch, detail::cat("observable site ", site, " out of range"));
    if (per_site[site]) throw Error(ErrorKind::invalid_argument, detail::cat("observable site ", site, " listed twice"));
    if (o.rows() != d || o.cols() != d) throw Error(ErrorKind::dimension_mismatch, "observable has the wrong dimension");
    if (!is_hermitian(o)) throw Error(ErrorKind::not_hermitian, detail::cat("observable at site ", site, " is not Hermitian"));
    per_site[site] = o;
  }
  const int layer_top = static_cast<int>(circuit.layers.size());
  for (int n = 0; n < n_sites; ++n) {
    const Matrix op = per_site[n] ? *per_site[n] : Matrix::Identity(d, d);
    LabeledTensor t;
    const int bra = next_label++;
    t.labels = {phys[n], bra};
    t.dims = {d, d};
    t.data.resize(d * d);
    for (Index a = 0; a < d; ++a)
      for (Index b = 0; b < d; ++b) t.data(a * d + b) = op(a, b);
    const int id = add_node(per_site[n] ? NodeKind::observable : NodeKind::cap, n, layer_top, std::move(t));
    net.wires.push_back({phys[n], WireKind::cap, d, producer[n], id});
    if (per_site[n]) {
      const auto e = eigh(*per_site[n]);
      net.observables.push_back({n, e.values, e.vectors});
    }
  }
  net.output_labels = phys;
  return net;
}

// ---------------------------------------------------------------------------
// Exact contraction

struct ExactResult {
  Complex value;
  Vector output;  // U|psi> on the interface legs, site 0 major
  ContractionStats stats;
};

namespace detail {
inline Vector interface_vector(const ChannelNetwork& net, const LabeledTensor& t) {
  return permuted(t, net.output_labels).data;
}

/// <v| (x) O |v> using the eigen-branch form of each observable.
inline Complex interface_value(const ChannelNetwork& net, const Vector& v) {
  const std::vector<Index> dims(net.n_sites, net.phys_dim);
  Vector w = v;
  for (const auto& ob : net.observables) {
    const std::array<int, 1> t{ob.site};
    w = oracle::apply_local(w, dims, t, ob.op());
  }
  return v.dot(w);
}
}  // namespace detail

/// Row-major contraction in time order: MPS row, then each gate row.
inline ExactResult evaluate_exact(const ChannelNetwork& net, Index limit = kMaxContractionSize) {
  std::vector<const LabeledTensor*> order;
  for (const auto& n : net.nodes)
    if (n.computational()) order.push_back(&n.tensor);
  ExactResult r;
  const LabeledTensor t = contract_sequence(order, &r.stats, limit);
  r.output = detail::interface_vector(net, t);
  r.value = detail::interface_value(net, r.output);
  return r;
}

// ---------------------------------------------------------------------------
// Region-partitioned evaluation

struct NetworkPartition {
  std::vector<std::vector<int>> regions;
};

inline void validate(const ChannelNetwork& net, const NetworkPartition& p) {
  std::vector<int> seen(net.nodes.size(), 0);
  for (std::size_t r = 0; r < p.regions.size(); ++r) {
    if (p.regions[r].empty()) throw Error(ErrorKind::invalid_partition, detail::cat("region ", r, " is empty"));
    for (int id : p.regions[r]) {
      if (id < 0 || id >= static_cast<int>(net.nodes.size()))
        throw Error(ErrorKind::invalid_partition, detail::cat("node ", id, " does not exist"));
      if (!net.nodes[id].computational())
        throw Error(ErrorKind::invalid_partition, detail::cat("node ", id, " belongs to the conjugation interface"));
      if (seen[id]++) throw Error(ErrorKind::invalid_partition, detail::cat("node ", id, " is in two regions"));
    }
  }
  for (const auto& n : net.nodes)
    if (n.computational() && !seen[n.id])
      throw Error(ErrorKind::invalid_partition, detail::cat("node ", n.id, " is not covered"));
}

inline NetworkPartition whole_partition(const ChannelNetwork& net) {
  NetworkPartition p{{{}}};
  for (const auto& n : net.nodes)
    if (n.computational()) p.regions[0].push_back(n.id);
  return p;
}

inline NetworkPartition singleton_partition(const ChannelNetwork& net) {
  NetworkPartition p;
  for (const auto& n : net.nodes)
    if (n.computational()) p.regions.push_back({n.id});
  return p;
}

/// Two regions: nodes on sites < cut and the rest.
inline NetworkPartition site_split(const ChannelNetwork& net, int cut) {
  NetworkPartition p{{{}, {}}};
  for (const auto& n : net.nodes)
    if (n.computational()) p.regions[n.site < cut ? 0 : 1].push_back(n.id);
  if (p.regions[1].empty()) p.regions.pop_back();
  if (p.regions[0].empty()) p.regions.erase(p.regions.begin());
  return p;
}

/// One region per row: the MPS row, then each circuit layer.
inline NetworkPartition layer_partition(const ChannelNetwork& net) {
  std::map<int, std::vector<int>> rows;
  for (const auto& n : net.nodes)
    if (n.computational()) rows[n.layer].push_back(n.id);
  NetworkPartition p;
  for (auto& [layer, ids] : rows) p.regions.push_back(std::move(ids));
  return p;
}

struct RegionResult {
  Complex value;
  std::vector<double> region_probs;
  ContractionStats stats;
};

/// Contracts each region with its cut legs open, then joins the regions in order. The
/// region probability is the chance that all Bell projections inside the region succeed
/// when every node is prepared as its normalized state.
inline RegionResult evaluate_regions(const ChannelNetwork& net, const NetworkPartition& partition,
                                     Index limit = kMaxContractionSize) {
  validate(net, partition);
  std::vector<int> region_of(net.nodes.size(), -1);
  for (std::size_t r = 0; r < partition.regions.size(); ++r)
    for (int id : partition.regions[r]) region_of[id] = static_cast<int>(r);

  const std::size_t n_regions = partition.regions.size();
  std::vector<LabeledTensor> pieces(n_regions);
  std::vector<ContractionStats> stats(n_regions);
  std::vector<double> probs(n_regions, 1.0);
  parallel_for(n_regions, [&](std::size_t r) {
    std::vector<int> ids = partition.regions[r];
    std::sort(ids.begin(), ids.end());
    std::vector<const LabeledTensor*> order;
    double node_norms = 1.0;
    for (int id : ids) {
      order.push_back(&net.nodes[id].tensor);
      node_norms *= squared_norm(net.nodes[id].tensor);
    }
    pieces[r] = contract_sequence(order, &stats[r], limit);
    double wire_factor = 1.0;
    for (const auto& w : net.wires)
      if (w.kind != WireKind::cap && w.from >= 0 && w.to >= 0 && region_of[w.from] == static_cast<int>(r) &&
          region_of[w.to] == static_cast<int>(r) && w.from != w.to)
        wire_factor /= static_cast<double>(w.dim);
    probs[r] = squared_norm(pieces[r]) * wire_factor / node_norms;
  });

  RegionResult out;
  LabeledTensor joined = LabeledTensor::scalar(1.0);
  for (std::size_t r = 0; r < n_regions; ++r) {
    joined = contract(joined, pieces[r], &out.stats, limit);
    out.stats.largest_intermediate = std::max(out.stats.largest_intermediate, stats[r].largest_intermediate);
    out.stats.flops += stats[r].flops;
  }
  out.value = detail::interface_value(net, detail::interface_vector(net, joined));
  out.region_probs = probs;
  return out;
}

// ---------------------------------------------------------------------------
// Heralded sampling

enum class SamplingStrategy { postselect, corrected };

struct SampledEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::size_t shots = 0;
  std::size_t accepted = 0;
  double acceptance_probability = 1.0;  // exact per-shot probability that every vertical wire heralds |omega>
};

/// Bonds where the MPS segments of two sites are joined: 2, 4, ... (only those with chi > 1).
inline std::vector<int> segment_join_bonds(const MPS& m) {
  std::vector<int> bonds;
  for (int b = 2; b < m.n_sites(); b += 2)
    if (m.bond_dim(b) > 1) bonds.push_back(b);
  return bonds;
}

namespace detail {
enum class BondMap { identity, oqt, depolarize };

/// Kraus set of the map placed on a bond of dimension chi.
inline std::vector<Matrix> bond_kraus(BondMap kind, Index chi) {
  switch (kind) {
    case BondMap::identity: return {Matrix::Identity(chi, chi)};
    case BondMap::oqt: return oqt_channel(chi).channel().kraus();
    case BondMap::depolarize: return depolarizing(chi).kraus();
  }
  return {};
}

/// Value of the network when the MPS bonds carry the given maps (a mixture of pure inputs).
inline double inserted_value(const ChannelNetwork& net, const std::vector<int>& bonds, const std::vector<BondMap>& maps) {
  std::vector<std::vector<Matrix>> kraus;
  for (std::size_t j = 0; j < bonds.size(); ++j) kraus.push_back(bond_kraus(maps[j], net.state.bond_dim(bonds[j])));
  std::vector<std::size_t> idx(bonds.size(), 0);
  double total = 0.0;
  while (true) {
    MPS m = net.state;
    for (std::size_t j = 0; j < bonds.size(); ++j)
      for (auto& a : m.tensors[bonds[j]]) a = a * kraus[j][idx[j]];
    const auto net_m = build_network(m, net.circuit, net.operators, {false});
    total += evaluate_exact(net_m).value.real();
    std::size_t j = 0;
    while (j < idx.size() && ++idx[j] == kraus[j].size()) idx[j++] = 0;
    if (j == idx.size()) break;
  }
  return total;
}
}  // namespace detail

/// Monte-Carlo over the heralded wire outcomes. Each shot draws the Bell outcome of every
/// vertical wire (|omega> with probability 1/d^2, independent of the rest because each
/// wire ends on the maximally mixed input of a gate's Choi state); accepted shots carry the
/// conditional value of the observable, rescaled by the acceptance probability.
///
/// corrected: the MPS is additionally prepared in two-site segments joined by Bell binary
/// measurements. A failed join leaves the map P on its bond; with
///   id = chi^2 Delta - (chi^2 - 1) P
/// each failure pattern S is turned into an unbiased estimate by the factor
/// prod_{j in S} (-(chi_j^2 - 1)) and an offset made of exactly computable terms in which the
/// remaining failed bonds carry Delta instead.
inline SampledEstimate evaluate_sampled(const ChannelNetwork& net, std::size_t shots, std::uint64_t seed,
                                        SamplingStrategy strategy = SamplingStrategy::postselect) {
  if (shots < 1) throw Error(ErrorKind::invalid_argument, "evaluate_sampled needs at least one shot");
  std::vector<double> wire_success;
  for (const auto& w : net.wires)
    if (w.kind == WireKind::vertical) wire_success.push_back(1.0 / static_cast<double>(w.dim * w.dim));
  double p_acc = 1.0;
  for (double p : wire_success) p_acc *= p;

  std::vector<int> joins;
  if (strategy == SamplingStrategy::corrected) joins = segment_join_bonds(net.state);
  const std::size_t n_join = joins.size();
  if (n_join > 16) throw Error(ErrorKind::size_guard, "too many segment joins for the corrected strategy");
  std::vector<double> join_success, factor, chi_sq;
  for (int b : joins) {
    const double c2 = static_cast<double>(net.state.bond_dim(b) * net.state.bond_dim(b));
    chi_sq.push_back(c2);
    join_success.push_back(1.0 / c2);
    factor.push_back(-(c2 - 1.0));
  }

  // Conditional values and offsets for every failure pattern S (bitmask over joins).
  const std::size_t n_pattern = std::size_t{1} << n_join;
  std::vector<double> conditional(n_pattern, 0.0), coefficient(n_pattern, 1.0), offset(n_pattern, 0.0);
  if (n_join == 0) {
    conditional[0] = evaluate_exact(net).value.real();
  } else {
    // values[t][u]: bonds in T carry P, bonds in U carry Delta, the rest identity
    std::map<std::pair<std::size_t, std::size_t>, double> values;
    auto value_of = [&](std::size_t t, std::size_t u) {
      const auto key = std::make_pair(t, u);
      const auto it = values.find(key);
      if (it != values.end()) return it->second;
      std::vector<detail::BondMap> maps(n_join, detail::BondMap::identity);
      for (std::size_t j = 0; j < n_join; ++j) {
        if (t >> j & 1) maps[j] = detail::BondMap::oqt;
        if (u >> j & 1) maps[j] = detail::BondMap::depolarize;
      }
      const double v = detail::inserted_value(net, joins, maps);
      values.emplace(key, v);
      return v;
    };
    for (std::size_t s = 0; s < n_pattern; ++s) {
      conditional[s] = value_of(s, 0);
      for (std::size_t j = 0; j < n_join; ++j)
        if (s >> j & 1) coefficient[s] *= factor[j];
      for (std::size_t t = s;; t = (t - 1) & s) {  // subsets of s
        if (t != s) {
          double w = 1.0;
          for (std::size_t j = 0; j < n_join; ++j) {
            if (t >> j & 1) w *= factor[j];
            else if (s >> j & 1) w *= chi_sq[j];
          }
          offset[s] += w * value_of(t, s & ~t);
        }
        if (t == 0) break;
      }
    }
  }

  std::vector<double> x(shots);
  std::vector<char> acc(shots);
  parallel_for(shots, [&](std::size_t k) {
    SplitMix64 gen(derive_seed(seed, k));
    std::size_t s = 0;
    for (std::size_t j = 0; j < n_join; ++j)
      if (gen.uniform() >= join_success[j]) s |= std::size_t{1} << j;
    bool ok = true;
    for (double p : wire_success) ok = (gen.uniform() < p) && ok;
    acc[k] = ok;
    x[k] = (ok ? coefficient[s] * conditional[s] / p_acc : 0.0) + offset[s];
  });

  SampledEstimate est;
  est.shots = shots;
  est.acceptance_probability = p_acc;
  for (char a : acc) est.accepted += a;
  if (est.accepted == 0)
    throw Error(ErrorKind::sampling_failure,
                detail::cat("no accepted shots out of ", shots, "; acceptance probability per shot is ", p_acc,
                            " over ", wire_success.size(), " vertical wires"));
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(shots);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var = shots > 1 ? var / static_cast<double>(shots - 1) : 0.0;
  est.estimate = mean;
  est.stderr_ = std::sqrt(var / static_cast<double>(shots));
  return est;
}

// ---------------------------------------------------------------------------
// Segment preparation with oblivious teleportation joins

struct OqtSegment {
  int first_site = 0;
  Channel channel;  // bond first_site -> bond first_site + 2, Kraus index (i_n, i_{n+1})
  PurifiedChoiState state;
};

struct OqtJoin {
  int bond = 0;
  Index dim = 1;
  int left_segment = 0;
};

struct OqtPlan {
  std::vector<OqtSegment> segments;
  std::vector<OqtJoin> joins;
  bool padded = false;
  Complex boundary = 1.0;
  MPS source;  // left-canonical, even site count, B = 1
};

inline OqtPlan oqt_prepare_plan(const MPS& psi) {
  validate(psi);
  if (!psi.open_boundary()) throw Error(ErrorKind::invalid_argument, "preparation plans need open boundary conditions");
  if (!is_left_canonical(psi)) throw Error(ErrorKind::not_canonical, "oqt_prepare_plan needs a left-canonical state");
  OqtPlan plan;
  plan.boundary = psi.boundary(0, 0);
  plan.source = psi;
  plan.source.boundary = Matrix::Identity(1, 1);
  if (plan.source.n_sites() % 2 == 1) {
    const Index chi = plan.source.bond_dim(plan.source.n_sites());
    plan.source.tensors.push_back({Matrix::Identity(chi, chi)});
    plan.padded = true;
  }
  const int n_sites = plan.source.n_sites();
  for (int n = 0; n < n_sites; n += 2) {
    std::vector<Matrix> kraus;
    for (const auto& a : plan.source.tensors[n])
      for (const auto& b : plan.source.tensors[n + 1]) kraus.push_back(b * a);
    Channel ch(std::move(kraus), 1e-9);
    auto st = purified_choi(ch);
    plan.segments.push_back({n, std::move(ch), std::move(st)});
  }
  for (std::size_t k = 0; k + 1 < plan.segments.size(); ++k) {
    const int b = plan.segments[k + 1].first_site;
    plan.joins.push_back({b, plan.source.bond_dim(b), static_cast<int>(k)});
  }
  return plan;
}

/// Density-matrix plan: segment k occupies legs 3k (output bond), 3k+1 (physical pair) and
/// 3k+2 (input reference). Each join measures {|omega><omega|, 1 - |omega><omega|} on the
/// output bond of one segment and the input reference of the next; then all bond legs are
/// discarded, leaving the physical pairs in site order.
inline oracle::BranchPlan to_branch_plan(const OqtPlan& plan) {
  oracle::BranchPlan bp;
  Vector psi = Vector::Ones(1);
  for (const auto& s : plan.segments) {
    bp.leg_dims.insert(bp.leg_dims.end(), {s.state.out_dim, s.state.ancilla_dim, s.state.in_dim});
    psi = kron(psi, s.state.vector);
  }
  oracle::guard_dim(psi.size(), oracle::kMaxDensityDim, "to_branch_plan");
  bp.initial = projector(psi);
  for (const auto& j : plan.joins)
    bp.steps.push_back(oracle::BranchStep::measure({3 * j.left_segment, 3 * (j.left_segment + 1) + 2},
                                                   bell_binary_measurement(j.dim)));
  std::vector<int> bonds;
  for (std::size_t k = 0; k < plan.segments.size(); ++k) {
    bonds.push_back(static_cast<int>(3 * k));
    bonds.push_back(static_cast<int>(3 * k + 2));
  }
  bp.steps.push_back(oracle::BranchStep::discard(bonds));
  return bp;
}

inline std::vector<int> physical_legs(const OqtPlan& plan) {
  std::vector<int> legs;
  for (std::size_t k = 0; k < plan.segments.size(); ++k) legs.push_back(static_cast<int>(3 * k + 1));
  return legs;
}

namespace detail {
inline Matrix plan_operator(const OqtPlan& plan, const SiteOperators& ops) {
  const int n_sites = plan.source.n_sites();
  std::vector<Matrix> factors;
  for (int n = 0; n < n_sites; ++n) factors.push_back(Matrix::Identity(plan.source.phys_dim(n), plan.source.phys_dim(n)));
  for (const auto& [site, o] : ops) {
    if (site < 0 || site >= n_sites) throw Error(ErrorKind::dimension_mismatch, "plan operator site out of range");
    factors[site] = o;
  }
  return kron_all(factors);
}

/// sum over Kraus insertions of <O> on the plan's source state.
inline Complex plan_inserted_value(const OqtPlan& plan, const SiteOperators& ops, const std::vector<BondMap>& maps) {
  std::vector<std::vector<Matrix>> kraus;
  for (std::size_t j = 0; j < plan.joins.size(); ++j) kraus.push_back(bond_kraus(maps[j], plan.joins[j].dim));
  std::vector<std::size_t> idx(plan.joins.size(), 0);
  Complex total{};
  while (true) {
    MPS m = plan.source;
    for (std::size_t j = 0; j < plan.joins.size(); ++j)
      for (auto& a : m.tensors[plan.joins[j].bond]) a = a * kraus[j][idx[j]];
    total += expectation_product(m, ops);
    std::size_t j = 0;
    while (j < idx.size() && ++idx[j] == kraus[j].size()) idx[j++] = 0;
    if (j == idx.size()) break;
  }
  return total;
}
}  // namespace detail

struct OqtReconstruction {
  Complex value;          // corrected sum over every branch
  Complex postselected;   // all joins succeeded, rescaled by the success probability
  double success_probability = 0.0;
  std::size_t branches = 0;
};

/// Exhaustive branch simulation of the plan; every failure pattern contributes through the
/// corrected estimator of evaluate_sampled.
inline OqtReconstruction oqt_reconstruct(const OqtPlan& plan, const SiteOperators& ops) {
  for (const auto& j : plan.joins)
    if (j.dim < 2) throw Error(ErrorKind::invalid_argument, "joins of dimension one carry no teleportation");
  const auto branches = oracle::channel_branch_simulate(to_branch_plan(plan));
  const Matrix op = detail::plan_operator(plan, ops);
  const auto legs = physical_legs(plan);
  const std::size_t n_join = plan.joins.size();
  std::map<std::pair<std::size_t, std::size_t>, Complex> values;
  auto value_of = [&](std::size_t t, std::size_t u) {
    const auto key = std::make_pair(t, u);
    if (auto it = values.find(key); it != values.end()) return it->second;
    std::vector<detail::BondMap> maps(n_join, detail::BondMap::identity);
    for (std::size_t j = 0; j < n_join; ++j) {
      if (t >> j & 1) maps[j] = detail::BondMap::oqt;
      if (u >> j & 1) maps[j] = detail::BondMap::depolarize;
    }
    const Complex v = detail::plan_inserted_value(plan, ops, maps);
    values.emplace(key, v);
    return v;
  };

  OqtReconstruction out;
  out.branches = branches.size();
  const double scale = std::norm(plan.boundary);
  for (const auto& b : branches) {
    std::size_t s = 0;
    for (std::size_t j = 0; j < n_join; ++j)
      if (b.outcomes[j]) s |= std::size_t{1} << j;
    const Complex observed = oracle::branch_expectation(b, legs, op);  // P(S) E[O|S]
    double coeff = 1.0;
    Complex off{};
    for (std::size_t j = 0; j < n_join; ++j)
      if (s >> j & 1) coeff *= -(static_cast<double>(plan.joins[j].dim * plan.joins[j].dim) - 1.0);
    for (std::size_t t = s;; t = (t - 1) & s) {
      if (t != s) {
        double w = 1.0;
        for (std::size_t j = 0; j < n_join; ++j) {
          const double c2 = static_cast<double>(plan.joins[j].dim * plan.joins[j].dim);
          if (t >> j & 1) w *= -(c2 - 1.0);
          else if (s >> j & 1) w *= c2;
        }
        off += w * value_of(t, s & ~t);
      }
      if (t == 0) break;
    }
    out.value += scale * (coeff * observed + b.probability * off);
    if (s == 0) {
      out.success_probability = b.probability;
      out.postselected = scale * observed / b.probability;
    }
  }
  return out;
}

/// Normalized physical state of the all-success branch, site 0 major.
inline Matrix oqt_postselected_state(const OqtPlan& plan) {
  const auto branches = oracle::channel_branch_simulate(to_branch_plan(plan));
  for (const auto& b : branches) {
    bool all_zero = true;
    for (int o : b.outcomes) all_zero = all_zero && o == 0;
    if (all_zero) return b.state / b.probability;
  }
  throw Error(ErrorKind::numerical, "plan has no all-success branch");
}

// ---------------------------------------------------------------------------
// Resources

struct ResourceEstimate {
  std::size_t state_qudits = 0;      // floor(N / 2)
  std::size_t total_gates = 0;       // M = L floor(N / 2)
  std::size_t evolution_qudits = 0;  // 6 M
  std::size_t actual_gates = 0;      // gates present in the circuit
  std::string sample_cost_order = "O(N^2 M L)";
};

inline ResourceEstimate resources(const BrickworkCircuit& circuit) {
  validate(circuit);
  ResourceEstimate r;
  const auto half = static_cast<std::size_t>(circuit.n_sites / 2);
  r.state_qudits = half;
  r.total_gates = circuit.layers.size() * half;
  r.evolution_qudits = 6 * r.total_gates;
  r.actual_gates = circuit.gate_count();
  return r;
}

}  // namespace epsim
