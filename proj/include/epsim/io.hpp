#pragma once

// JSON serialization. Every document carries "schema_version". Matrices are flat row-major
// lists of [re, im] pairs (a bare number is read as a real entry); the shape comes from the
// surrounding fields or, for square matrices, from the entry count.

#include <fstream>

#include "epsim/algorithms.hpp"
#include "epsim/channels.hpp"
#include "epsim/circuit.hpp"
#include "epsim/hamiltonians.hpp"
#include "epsim/mps.hpp"
#include "epsim/network.hpp"
#include "json.hpp"

namespace epsim::io {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

inline Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

inline Complex complex_from(const Json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw Error(ErrorKind::parse, detail::cat("expected a number or [re, im], got ", j.dump()));
}

inline Json matrix_json(const Matrix& m) {
  Json out = Json::array();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) out.push_back(complex_json(m(r, c)));
  return out;
}

inline Matrix matrix_from(const Json& j, Index rows, Index cols) {
  if (!j.is_array()) throw Error(ErrorKind::parse, "matrix must be a JSON array");
  if (static_cast<Index>(j.size()) != rows * cols)
    throw Error(ErrorKind::parse, detail::cat("matrix has ", j.size(), " entries, expected ", rows * cols));
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = complex_from(j[static_cast<std::size_t>(r * cols + c)]);
  return m;
}

inline Matrix square_matrix_from(const Json& j) {
  if (!j.is_array()) throw Error(ErrorKind::parse, "matrix must be a JSON array");
  const auto n = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(j.size()))));
  if (n * n != static_cast<Index>(j.size()) || n == 0)
    throw Error(ErrorKind::parse, detail::cat("a square matrix needs a square entry count, got ", j.size()));
  return matrix_from(j, n, n);
}

inline Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Index k = 0; k < v.size(); ++k) out.push_back(complex_json(v(k)));
  return out;
}

inline Vector vector_from(const Json& j) {
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::parse, "vector must be a non-empty JSON array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Index>(k)) = complex_from(j[k]);
  return v;
}

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorKind::parse, detail::cat("missing field \"", key, "\""));
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, detail::cat("field \"", key, "\": ", e.what()));
  }
}

inline void check_version(const Json& j) {
  if (j.contains("schema_version") && j["schema_version"] != kSchemaVersion)
    throw Error(ErrorKind::parse, detail::cat("unsupported schema_version ", j["schema_version"].dump()));
}

inline Json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::parse, detail::cat("cannot open ", path));
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, detail::cat(path, ": ", e.what()));
  }
}

inline void write_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::parse, detail::cat("cannot write ", path));
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Channels

inline Json to_json(const Channel& ch) {
  Json k = Json::array();
  for (const auto& m : ch.kraus()) k.push_back(matrix_json(m));
  return {{"schema_version", kSchemaVersion}, {"in_dim", ch.in_dim()}, {"out_dim", ch.out_dim()}, {"kraus", k}};
}

inline Channel channel_from(const Json& j) {
  check_version(j);
  const auto din = field<Index>(j, "in_dim"), dout = field<Index>(j, "out_dim");
  std::vector<Matrix> kraus;
  for (const auto& m : field<Json>(j, "kraus")) kraus.push_back(matrix_from(m, dout, din));
  return Channel(kraus);
}

inline Json to_json(const ChoiState& w) {
  return {{"schema_version", kSchemaVersion}, {"in_dim", w.in_dim}, {"out_dim", w.out_dim}, {"choi", matrix_json(w.matrix)}};
}

inline ChoiState choi_from(const Json& j) {
  check_version(j);
  ChoiState w{field<Index>(j, "in_dim"), field<Index>(j, "out_dim"), {}};
  w.matrix = matrix_from(field<Json>(j, "choi"), w.in_dim * w.out_dim, w.in_dim * w.out_dim);
  validate(w);
  return w;
}

// ---------------------------------------------------------------------------
// MPS: tensors[n][i][bond_in][bond_out], boundary[row][col]

inline Json to_json(const MPS& m) {
  Json tensors = Json::array();
  for (const auto& site : m.tensors) {
    Json s = Json::array();
    for (const auto& a : site) {
      // A maps bond n (columns) to bond n + 1 (rows)
      Json rows = Json::array();
      for (Index in = 0; in < a.cols(); ++in) {
        Json row = Json::array();
        for (Index out = 0; out < a.rows(); ++out) row.push_back(complex_json(a(out, in)));
        rows.push_back(row);
      }
      s.push_back(rows);
    }
    tensors.push_back(s);
  }
  Json boundary = Json::array();
  for (Index r = 0; r < m.boundary.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < m.boundary.cols(); ++c) row.push_back(complex_json(m.boundary(r, c)));
    boundary.push_back(row);
  }
  return {{"schema_version", kSchemaVersion}, {"n_sites", m.n_sites()}, {"phys_dims", m.phys_dims()},
          {"tensors", tensors}, {"boundary", boundary}};
}

inline Matrix nested_matrix_from(const Json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw Error(ErrorKind::parse, "expected nested rows");
  const auto rows = static_cast<Index>(j.size()), cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    if (static_cast<Index>(j[r].size()) != cols) throw Error(ErrorKind::parse, "ragged matrix rows");
    for (Index c = 0; c < cols; ++c) m(r, c) = complex_from(j[r][c]);
  }
  return m;
}

inline MPS mps_from(const Json& j) {
  check_version(j);
  MPS m;
  const auto n = field<int>(j, "n_sites");
  const auto dims = field<std::vector<Index>>(j, "phys_dims");
  const auto& t = field<Json>(j, "tensors");
  if (static_cast<int>(t.size()) != n || static_cast<int>(dims.size()) != n)
    throw Error(ErrorKind::parse, "n_sites, phys_dims and tensors disagree");
  for (int s = 0; s < n; ++s) {
    std::vector<Matrix> site;
    for (const auto& a : t[s]) site.push_back(nested_matrix_from(a).transpose());
    if (static_cast<Index>(site.size()) != dims[s]) throw Error(ErrorKind::parse, detail::cat("site ", s, " has wrong phys_dim"));
    m.tensors.push_back(site);
  }
  m.boundary = j.contains("boundary") ? nested_matrix_from(j["boundary"]) : Matrix::Identity(1, 1);
  validate(m);
  return m;
}

// ---------------------------------------------------------------------------
// Circuits: {"n_sites", "phys_dim", "layers": [[{"site", "gate"}]]}

inline Json to_json(const BrickworkCircuit& c) {
  Json layers = Json::array();
  for (const auto& layer : c.layers) {
    Json l = Json::array();
    for (const auto& g : layer) l.push_back({{"site", g.site}, {"gate", matrix_json(g.u)}});
    layers.push_back(l);
  }
  return {{"schema_version", kSchemaVersion}, {"n_sites", c.n_sites}, {"phys_dim", c.phys_dim}, {"layers", layers}};
}

inline BrickworkCircuit circuit_from(const Json& j) {
  check_version(j);
  BrickworkCircuit c{field<int>(j, "n_sites"), j.value("phys_dim", Index{2}), {}};
  for (const auto& l : field<Json>(j, "layers")) {
    std::vector<Gate> layer;
    // a layer may be a single gate object
    const Json gates_json = l.is_array() ? l : Json::array({l});
    for (const auto& g : gates_json) layer.push_back({field<int>(g, "site"), square_matrix_from(field<Json>(g, "gate"))});
    c.layers.push_back(layer);
  }
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Hamiltonians: either explicit terms or {"model": "tfim" | "heisenberg", ...}

inline Json to_json(const LocalHamiltonian& h) {
  Json terms = Json::array();
  for (const auto& t : h.terms) terms.push_back({{"support", t.support}, {"matrix", matrix_json(t.matrix)}});
  return {{"schema_version", kSchemaVersion}, {"n_sites", h.n_sites}, {"phys_dim", h.phys_dim}, {"terms", terms}};
}

inline LocalHamiltonian hamiltonian_from(const Json& j) {
  check_version(j);
  if (j.contains("model")) {
    const auto model = field<std::string>(j, "model");
    const auto n = field<int>(j, "n_sites");
    if (model == "tfim") return build_tfim(n, j.value("J", 1.0), j.value("h", 1.0));
    if (model == "heisenberg") return build_heisenberg(n, j.value("J", 1.0));
    throw Error(ErrorKind::parse, detail::cat("unknown model \"", model, "\""));
  }
  LocalHamiltonian h{field<int>(j, "n_sites"), j.value("phys_dim", Index{2}), {}};
  for (const auto& t : field<Json>(j, "terms"))
    h.terms.push_back({field<std::vector<int>>(t, "support"), square_matrix_from(field<Json>(t, "matrix"))});
  validate(h);
  return h;
}

// ---------------------------------------------------------------------------
// Networks (write only)

inline Json to_json(const ChannelNetwork& net) {
  Json nodes = Json::array(), wires = Json::array();
  for (const auto& n : net.nodes)
    nodes.push_back({{"id", n.id}, {"kind", to_string(n.kind)}, {"site", n.site}, {"layer", n.layer},
                     {"legs", n.tensor.labels}, {"dims", n.tensor.dims}});
  for (const auto& w : net.wires)
    wires.push_back({{"label", w.label}, {"kind", to_string(w.kind)}, {"dim", w.dim}, {"from", w.from}, {"to", w.to}});
  return {{"schema_version", kSchemaVersion}, {"n_sites", net.n_sites}, {"phys_dim", net.phys_dim},
          {"nodes", nodes}, {"wires", wires}, {"output_labels", net.output_labels},
          {"conjugate_layer", net.conjugate_layer}};
}

// ---------------------------------------------------------------------------
// Thermal jobs and results

inline ThermalJob thermal_job_from(const Json& j) {
  check_version(j);
  ThermalJob job;
  job.hamiltonian = hamiltonian_from(field<Json>(j, "hamiltonian"));
  const Index dim = job.hamiltonian.dim();
  const auto& obs = field<Json>(j, "observable");
  if (obs.is_string()) {
    if (obs.get<std::string>() != "identity") throw Error(ErrorKind::parse, "observable string must be \"identity\"");
    job.observable = Matrix::Identity(dim, dim);
  } else if (obs.is_object()) {
    // local observable {"support", "matrix"}
    const std::vector<Index> dims(job.hamiltonian.n_sites, job.hamiltonian.phys_dim);
    const auto support = field<std::vector<int>>(obs, "support");
    job.observable = embed(square_matrix_from(field<Json>(obs, "matrix")), support, dims);
  } else {
    job.observable = matrix_from(obs, dim, dim);
  }
  job.beta = field<double>(j, "beta");
  job.epsilon = j.value("epsilon", 1e-3);
  job.s = j.value("s", 0);
  job.fit_order = j.value("fit_order", 0);
  job.substeps = j.value("R", std::int64_t{0});
  if (j.contains("grid")) job.grid = field<std::vector<double>>(j, "grid");
  const auto mode = j.value("mode", std::string("exact"));
  if (mode == "exact") job.evolution = TimeEvolution::exact;
  else if (mode == "trotter") job.evolution = TimeEvolution::trotter;
  else throw Error(ErrorKind::parse, detail::cat("mode must be \"exact\" or \"trotter\", got \"", mode, "\""));
  job.normalized = j.value("normalized", false);
  return job;
}

inline Json to_json(const ThermalResult& r) {
  const auto& b = r.budget;
  return {{"schema_version", kSchemaVersion},
          {"value", r.value},
          {"s", r.s},
          {"grid", r.grid},
          {"tau", r.tau},
          {"R", r.substeps},
          {"fit_order", r.fit_order},
          {"total_steps", r.total_steps},
          {"shift", r.shift},
          {"budget",
           {{"taylor", b.taylor}, {"trotter", b.trotter}, {"solver", b.solver},
            {"allocation", {{"taylor", b.taylor_allocation}, {"trotter", b.trotter_allocation}, {"solver", b.solver_allocation}}}}},
          {"moments_condition", r.max_condition}};
}

inline Json to_json(const ResourceEstimate& r) {
  return {{"state_qudits", r.state_qudits}, {"total_gates", r.total_gates}, {"evolution_qudits", r.evolution_qudits},
          {"actual_gates", r.actual_gates}, {"sample_cost_order", r.sample_cost_order}};
}

}  // namespace epsim::io
