#pragma once

// Config-driven tasks and verification suites behind the command-line tool.

#include <chrono>
#include <filesystem>
#include <functional>

#include "epsim/io.hpp"

namespace epsim::experiment {

using io::Json;

struct RunOptions {
  std::optional<std::string> task;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> evaluator;
};

namespace detail {

// A field is either an inline object or a path to a JSON file relative to the config.
inline Json resolve(const Json& j, const std::filesystem::path& base) {
  if (!j.is_string()) return j;
  std::filesystem::path p = j.get<std::string>();
  if (p.is_relative()) p = base / p;
  return io::read_file(p.string());
}

inline Matrix named_operator(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "I") return Matrix::Identity(2, 2);
    if (s == "X") return gates::pauli_x();
    if (s == "Y") return gates::pauli_y();
    if (s == "Z") return gates::pauli_z();
    throw Error(ErrorKind::parse, epsim::detail::cat("unknown operator \"", s, "\" (use I, X, Y, Z or a matrix)"));
  }
  return io::square_matrix_from(j);
}

inline MPS state_from(const Json& j, int n_sites, Index d, Rng& rng) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "zero") return product_mps(std::vector<Vector>(n_sites, basis_vector(d, 0)));
    if (s == "plus") return product_mps(std::vector<Vector>(n_sites, Vector::Constant(d, 1.0 / std::sqrt(double(d)))));
    throw Error(ErrorKind::parse, epsim::detail::cat("unknown state \"", s, "\""));
  }
  if (j.contains("random")) {
    const auto chi = io::field<Index>(j["random"], "chi");
    return canonicalize(random_mps(n_sites, d, chi, rng), Canonical::left);
  }
  if (j.contains("statevector"))
    return from_statevector(io::vector_from(j["statevector"]), std::vector<Index>(n_sites, d));
  return canonicalize(io::mps_from(j), Canonical::left);
}

inline BrickworkCircuit circuit_from(const Json& j, int n_sites, Index d, Rng& rng, const std::filesystem::path& base) {
  if (j.contains("random")) return random_brickwork(n_sites, io::field<int>(j["random"], "layers"), d, rng);
  if (j.contains("trotter")) {
    const auto& t = j["trotter"];
    const auto h = io::hamiltonian_from(resolve(io::field<Json>(t, "hamiltonian"), base));
    return trotter_circuit(h, io::field<double>(t, "t"), io::field<int>(t, "R"));
  }
  return io::circuit_from(j);
}

inline Json complex_report(Complex z) { return io::complex_json(z); }

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tasks. Each returns the task-specific part of the report and fills "config" defaults in
// place so the report records every value that was used.

inline Json run_dynamics(Json& cfg, const std::filesystem::path& base, std::uint64_t seed, const std::string& evaluator) {
  Rng rng(seed);
  const int n = cfg.value("n_sites", 0);
  const Index d = cfg.value("phys_dim", Index{2});
  if (!cfg.contains("state")) cfg["state"] = "zero";
  if (!cfg.contains("circuit")) throw Error(ErrorKind::parse, "dynamics needs a \"circuit\"");
  const Json circuit_json = detail::resolve(cfg["circuit"], base);
  const BrickworkCircuit circuit = detail::circuit_from(circuit_json, n, d, rng, base);
  const int nn = circuit.n_sites;
  cfg["n_sites"] = nn;
  cfg["phys_dim"] = circuit.phys_dim;
  const Json& sj = cfg["state"];
  const bool named = sj.is_string() && (sj == "zero" || sj == "plus");
  const MPS psi = detail::state_from(named ? sj : detail::resolve(sj, base), nn, circuit.phys_dim, rng);
  SiteOperators ops;
  if (!cfg.contains("observables")) cfg["observables"] = Json::array({{{"site", 0}, {"op", "Z"}}});
  for (const auto& o : cfg["observables"]) ops.push_back({io::field<int>(o, "site"), detail::named_operator(o.at("op"))});

  const auto net = build_network(psi, circuit, ops);
  Json out;
  out["network"] = {{"nodes", net.nodes.size()}, {"wires", net.wires.size()}, {"vertical_wires", net.count(WireKind::vertical)}};
  out["resources"] = io::to_json(resources(circuit));
  Complex value;
  if (evaluator == "exact") {
    const auto r = evaluate_exact(net);
    value = r.value;
    out["largest_intermediate"] = r.stats.largest_intermediate;
  } else if (evaluator == "regions") {
    if (!cfg.contains("partition")) cfg["partition"] = "layers";
    const auto kind = cfg["partition"].get<std::string>();
    NetworkPartition p;
    if (kind == "whole") p = whole_partition(net);
    else if (kind == "singleton") p = singleton_partition(net);
    else if (kind == "layers") p = layer_partition(net);
    else if (kind == "sites") p = site_split(net, cfg.value("cut", nn / 2));
    else throw Error(ErrorKind::parse, epsim::detail::cat("unknown partition \"", kind, "\""));
    const auto r = evaluate_regions(net, p);
    value = r.value;
    out["region_probabilities"] = r.region_probs;
  } else if (evaluator == "sampled") {
    if (!cfg.contains("shots")) cfg["shots"] = 100000;
    if (!cfg.contains("strategy")) cfg["strategy"] = "postselect";
    const auto strategy = cfg["strategy"].get<std::string>();
    if (strategy != "postselect" && strategy != "corrected")
      throw Error(ErrorKind::parse, "strategy must be \"postselect\" or \"corrected\"");
    const auto r = evaluate_sampled(net, cfg["shots"].get<std::size_t>(), seed,
                                    strategy == "postselect" ? SamplingStrategy::postselect : SamplingStrategy::corrected);
    value = r.estimate;
    out["stderr"] = r.stderr_;
    out["shots"] = r.shots;
    out["accepted"] = r.accepted;
    out["acceptance_probability"] = r.acceptance_probability;
  } else {
    throw Error(ErrorKind::parse, epsim::detail::cat("unknown evaluator \"", evaluator, "\""));
  }
  out["value"] = value.real();
  out["value_imag"] = value.imag();
  const Index total = static_cast<Index>(std::pow(static_cast<double>(circuit.phys_dim), nn));
  if (total <= oracle::kMaxStateDim) {
    const oracle::DenseState st{psi.phys_dims(), to_statevector(psi)};
    const Complex o = oracle::expectation(oracle::apply_circuit(st, circuit), ops);
    out["oracle"] = o.real();
    out["abs_error"] = std::abs(value - o);
  }
  return out;
}

inline Json run_thermal(Json& cfg, const std::filesystem::path& base) {
  if (!cfg.contains("job")) throw Error(ErrorKind::parse, "thermal needs a \"job\"");
  Json job_json = detail::resolve(cfg["job"], base);
  if (job_json.contains("hamiltonian")) job_json["hamiltonian"] = detail::resolve(job_json["hamiltonian"], base);
  const ThermalJob job = io::thermal_job_from(job_json);
  cfg["job"] = job_json;
  const auto r = thermal_value(job);
  Json out = io::to_json(r);
  out.erase("schema_version");
  if (job.hamiltonian.dim() <= kMaxDenseHamiltonian) {
    const Matrix h = dense(job.hamiltonian);
    double o = oracle::thermal_exact(job.observable, h, job.beta);
    if (job.normalized) o /= oracle::thermal_exact(Matrix::Identity(h.rows(), h.cols()), h, job.beta);
    out["oracle"] = o;
    out["abs_error"] = std::abs(r.value - o);
  }
  return out;
}

inline Json run_entropy(Json& cfg, const std::filesystem::path& base, std::uint64_t seed) {
  if (!cfg.contains("epsilon")) cfg["epsilon"] = 1e-3;
  if (!cfg.contains("mode")) cfg["mode"] = "exact";
  const double eps = cfg["epsilon"].get<double>();
  const auto mode = cfg["mode"].get<std::string>() == "trotter" ? TimeEvolution::trotter : TimeEvolution::exact;
  Matrix rho;
  LocalHamiltonian hm;
  if (cfg.contains("hamiltonian")) {
    hm = io::hamiltonian_from(detail::resolve(cfg["hamiltonian"], base));
    rho = matrix_exp(dense(hm), -1.0);
  } else {
    if (cfg.contains("density")) {
      rho = io::square_matrix_from(cfg["density"]);
    } else {
      // random full-rank state mixed with the identity
      const Json def = {{"n_qubits", 2}, {"mix", 0.5}};
      if (!cfg.contains("random")) cfg["random"] = def;
      const int nq = cfg["random"].value("n_qubits", 2);
      const double mix = cfg["random"].value("mix", 0.5);
      cfg["random"] = {{"n_qubits", nq}, {"mix", mix}};
      Rng rng(seed);
      const Index dim = Index{1} << nq;
      rho = (1.0 - mix) * random_density(dim, rng) + mix * Matrix::Identity(dim, dim) / static_cast<double>(dim);
    }
    hm = modular_hamiltonian(rho);
  }
  const auto r = entropy(hm, eps, mode);
  Json out{{"value", r.value}, {"terms", r.terms}, {"normalization", r.normalization}};
  out["oracle"] = oracle::entropy_exact(rho);
  out["abs_error"] = std::abs(r.value - out["oracle"].get<double>());
  return out;
}

inline Json run_amplitude(Json& cfg, std::uint64_t seed) {
  Rng rng(seed);
  if (!cfg.contains("n_qubits") && !cfg.contains("dim")) cfg["n_qubits"] = 2;
  const Index dim = cfg.contains("dim") ? cfg["dim"].get<Index>() : (Index{1} << cfg["n_qubits"].get<int>());
  auto state = [&](const char* key) -> Vector {
    if (!cfg.contains(key)) cfg[key] = "random";
    const auto& j = cfg[key];
    if (j.is_string() && j.get<std::string>() == "random") return random_state(dim, rng);
    Vector v = io::vector_from(j);
    return v / v.norm();
  };
  const Vector phi = state("phi");
  const Vector psi = cfg.contains("psi") && cfg["psi"].is_string() && cfg["psi"].get<std::string>() == "phi"
                         ? phi
                         : state("psi");
  if (!cfg.contains("unitary")) cfg["unitary"] = "random";
  Matrix u;
  if (cfg["unitary"].is_string()) {
    const auto s = cfg["unitary"].get<std::string>();
    if (s == "identity") u = Matrix::Identity(dim, dim);
    else if (s == "random") u = random_unitary(dim, rng);
    else throw Error(ErrorKind::parse, "unitary must be \"identity\", \"random\" or a matrix");
  } else {
    u = io::square_matrix_from(cfg["unitary"]);
  }
  if (!cfg.contains("shots")) cfg["shots"] = 0;
  const auto shots = cfg["shots"].get<std::int64_t>();
  const auto mode = shots > 0 ? EstimatorMode::sampled(shots, seed) : EstimatorMode::exact();
  const auto r = transition_amplitude(phi, u, psi, mode);
  Json out{{"value", detail::complex_report(r.amplitude.value)}, {"reference_basis_state", r.reference}};
  if (shots > 0) {
    out["stderr"] = r.amplitude.stderr_;
    out["shots"] = r.amplitude.shots;
  }
  const Complex o = oracle::amplitude_exact(phi, u, psi);
  out["oracle"] = detail::complex_report(o);
  out["abs_error"] = std::abs(r.amplitude.value - o);
  return out;
}

inline Json run_duality(Json& cfg, const std::filesystem::path& base, std::uint64_t seed) {
  Rng rng(seed);
  Channel ch = identity_channel(1);
  if (cfg.contains("channel")) {
    ch = io::channel_from(detail::resolve(cfg["channel"], base));
  } else {
    const Json def = {{"in_dim", 2}, {"out_dim", 2}, {"kraus", 2}};
    if (!cfg.contains("random")) cfg["random"] = def;
    const auto& r = cfg["random"];
    ch = Channel(random_kraus(r.value("in_dim", Index{2}), r.value("out_dim", Index{2}), r.value("kraus", Index{2}), rng));
  }
  const Matrix rho = cfg.contains("density") ? io::square_matrix_from(cfg["density"]) : random_density(ch.in_dim(), rng);
  const auto w = to_choi(ch);
  const Matrix direct = epsim::apply(ch, rho), via = choi_apply(w, rho);
  const Matrix round = epsim::apply(from_choi(w), rho);
  const auto dil = stinespring(ch);
  Json out;
  out["value"] = (via - direct).norm();
  out["choi_apply_residual"] = (via - direct).norm();
  out["from_choi_residual"] = (round - direct).norm();
  out["stinespring_residual"] = (dilation_apply(dil, rho) - direct).norm();
  out["choi_trace"] = w.matrix.trace().real();
  out["oracle"] = 0.0;
  out["abs_error"] = out["value"];
  return out;
}

/// Runs one configured task and assembles the report.
inline Json run(Json cfg, const std::filesystem::path& base, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  io::check_version(cfg);
  if (opt.task) cfg["task"] = *opt.task;
  if (opt.seed) cfg["seed"] = *opt.seed;
  if (opt.evaluator) cfg["evaluator"] = *opt.evaluator;
  if (!cfg.contains("task")) throw Error(ErrorKind::parse, "config has no \"task\"");
  if (!cfg.contains("seed")) cfg["seed"] = 0;
  if (!cfg.contains("evaluator")) cfg["evaluator"] = "exact";
  cfg["schema_version"] = io::kSchemaVersion;
  const auto task = cfg["task"].get<std::string>();
  const auto seed = cfg["seed"].get<std::uint64_t>();
  const auto evaluator = cfg["evaluator"].get<std::string>();
  Json result;
  if (task == "dynamics") result = run_dynamics(cfg, base, seed, evaluator);
  else if (task == "thermal") result = run_thermal(cfg, base);
  else if (task == "entropy") result = run_entropy(cfg, base, seed);
  else if (task == "amplitude") result = run_amplitude(cfg, seed);
  else if (task == "duality-check") result = run_duality(cfg, base, seed);
  else
    throw Error(ErrorKind::parse,
                epsim::detail::cat("unknown task \"", task, "\" (dynamics, thermal, entropy, amplitude, duality-check)"));
  Json report{{"schema_version", io::kSchemaVersion}, {"task", task}, {"seed", seed}, {"status", "ok"}};
  for (auto it = result.begin(); it != result.end(); ++it) report[it.key()] = it.value();
  report["config"] = cfg;
  report["timing"] = {{"wall_time_s", detail::seconds_since(t0)}, {"threads", max_threads()}};
  return report;
}

inline Json error_report(const std::exception& e) {
  Json r{{"schema_version", io::kSchemaVersion}, {"status", "error"}, {"message", e.what()}};
  if (const auto* err = dynamic_cast<const Error*>(&e)) r["error"] = to_string(err->kind());
  else r["error"] = "internal";
  return r;
}

// ---------------------------------------------------------------------------
// Verification suites

struct Check {
  std::string suite, name;
  double residual = 0.0, threshold = 0.0;
  bool pass() const { return residual <= threshold; }
};

using CheckList = std::vector<Check>;

inline CheckList verify_duality(std::uint64_t seed) {
  Rng rng(seed);
  double r_apply = 0, r_round = 0, r_dil = 0, r_trace = 0, r_transfer = 0;
  for (int k = 0; k < 50; ++k) {
    std::uniform_int_distribution<Index> dim(1, 4);
    const Index d1 = dim(rng), d2 = dim(rng);
    const Index count = std::max<Index>(1, (d1 + d2 - 1) / d2) + (k % 3);
    Channel ch(random_kraus(d1, d2, count, rng));
    const Matrix rho = random_density(d1, rng);
    const auto w = to_choi(ch);
    const Matrix direct = epsim::apply(ch, rho);
    r_apply = std::max(r_apply, (choi_apply(w, rho) - direct).norm());
    r_round = std::max(r_round, (epsim::apply(from_choi(w), rho) - direct).norm());
    r_dil = std::max(r_dil, (dilation_apply(stinespring(ch), rho) - direct).norm());
    r_trace = std::max(r_trace, std::abs(w.matrix.trace() - 1.0));
    // transfer operator acts on vectorized inputs
    const Vector out = transfer(ch).matrix * vectorize(rho).entries;
    r_transfer = std::max(r_transfer, (out - vectorize(direct).entries).norm());
  }
  return {{"duality", "choi_apply equals apply", r_apply, 1e-12},
          {"duality", "from_choi round trip", r_round, 1e-10},
          {"duality", "Stinespring dilation", r_dil, 1e-10},
          {"duality", "Choi trace is one", r_trace, 1e-12},
          {"duality", "transfer operator action", r_transfer, 1e-12}};
}

/// tr(A Phi(rho)) from the two heralded branches of the state measurement on the input leg of
/// the Choi state, enumerated exactly.
inline double heralded_reconstruction(const Channel& ch, const Matrix& rho, const Matrix& obs) {
  const auto w = to_choi(ch);
  oracle::BranchPlan plan{{ch.out_dim(), ch.in_dim()}, w.matrix, {}};
  plan.steps.push_back(oracle::BranchStep::measure({1}, state_measurement(rho)));
  plan.steps.push_back(oracle::BranchStep::discard({1}));
  const auto branches = oracle::channel_branch_simulate(plan);
  double p[2] = {0, 0}, e[2] = {0, 0};
  for (const auto& br : branches) {
    const int o = br.outcomes.front();
    p[o] = br.probability;
    e[o] = p[o] > 0 ? oracle::branch_expectation(br, {0}, obs).real() / p[o] : 0.0;
  }
  const double offset = (obs * apply_linear(ch, Matrix::Identity(ch.in_dim(), ch.in_dim()))).trace().real();
  return reconstruct_from_branches(p[0], e[0], p[1], e[1], offset, ch.in_dim());
}

inline CheckList verify_binary(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Index d1 = 2 + k % 3, d2 = 2 + (k / 3) % 3;
    Channel ch(random_kraus(d1, d2, 2, rng));
    const Matrix rho = random_density(d1, rng);
    const Matrix obs = random_hermitian(d2, rng);
    worst = std::max(worst, std::abs(heralded_reconstruction(ch, rho, obs) - (obs * epsim::apply(ch, rho)).trace().real()));
  }
  return {{"duality", "binary measurement with offset", worst, 1e-10}};
}

inline CheckList verify_mps(std::uint64_t seed) {
  Rng rng(seed);
  double r_exp = 0, r_canon = 0, r_sv = 0, r_corr = 0, r_trunc = 0;
  for (int k = 0; k < 40; ++k) {
    const int n = 2 + k % 5;
    const MPS raw = random_mps(n, 2, 1 + k % 3, rng);
    const MPS m = canonicalize(raw, Canonical::left);
    r_canon = std::max(r_canon, std::abs(static_cast<double>(!is_left_canonical(m))));
    SiteOperators ops;
    for (int s = 0; s < n; ++s)
      if ((s + k) % 2 == 0) ops.push_back({s, random_hermitian(2, rng)});
    const Vector v = to_statevector(m);
    const Complex direct = oracle::expectation(oracle::DenseState{m.phys_dims(), v}, ops);
    r_exp = std::max(r_exp, std::abs(expectation_product(m, ops) - direct));
    const MPS back = from_statevector(v, m.phys_dims());
    r_sv = std::max(r_sv, (to_statevector(back) - v).norm());
    const MPS t = truncate(m, 64);
    r_trunc = std::max(r_trunc, (to_statevector(t) - v).norm());
    if (n >= 3) {
      const Matrix ox = random_hermitian(2, rng), oy = random_hermitian(2, rng);
      r_corr = std::max(r_corr, std::abs(two_point_correlator_branches(m, ox, 0, oy, n - 1) -
                                         two_point_correlator(m, ox, 0, oy, n - 1)));
    }
  }
  return {{"mps", "expectation_product equals statevector", r_exp, 1e-10},
          {"mps", "left canonical after canonicalize", r_canon, 0.0},
          {"mps", "from_statevector reproduces the state", r_sv, 1e-10},
          {"mps", "lossless truncation", r_trunc, 1e-10},
          {"mps", "branch correlator equals transfer form", r_corr, 1e-10}};
}

inline CheckList verify_network(std::uint64_t seed) {
  Rng rng(seed);
  double r_exact = 0, r_regions = 0, r_gate = 0;
  for (int k = 0; k < 20; ++k) {
    const int n = 2 + k % 4, l = 1 + k % 3;
    const MPS psi = canonicalize(random_mps(n, 2, 1 + k % 2, rng), Canonical::left);
    const auto c = random_brickwork(n, l, 2, rng);
    const SiteOperators ops{{k % n, gates::pauli(1 + k % 3)}};
    const auto net = build_network(psi, c, ops);
    const Complex e = evaluate_exact(net).value;
    const Complex o = oracle::expectation(oracle::apply_circuit({psi.phys_dims(), to_statevector(psi)}, c), ops);
    r_exact = std::max(r_exact, std::abs(e - o));
    for (const auto& p : {whole_partition(net), singleton_partition(net), layer_partition(net)})
      r_regions = std::max(r_regions, std::abs(evaluate_regions(net, p).value - e));
    for (const auto& layer : c.layers)
      for (const auto& g : layer) r_gate = std::max(r_gate, (recombine(compile_gate(g.u)) - g.u).norm());
  }
  // sampled estimator on a small network
  const MPS psi = canonicalize(random_mps(2, 2, 2, rng), Canonical::left);
  const auto c = random_brickwork(2, 1, 2, rng);
  const auto net = build_network(psi, c, {{0, gates::pauli_z()}});
  const double e = evaluate_exact(net).value.real();
  const auto s = evaluate_sampled(net, 100000, seed);
  return {{"network", "evaluate_exact equals oracle", r_exact, 1e-8},
          {"network", "regions agree across partitions", r_regions, 1e-10},
          {"network", "gate split recombines", r_gate, 1e-10},
          {"network", "postselected sampling within 4 sigma", std::abs(s.estimate - e) / std::max(s.stderr_, 1e-300), 4.0}};
}

inline CheckList verify_oqt(std::uint64_t seed) {
  Rng rng(seed);
  double r_mix = 0, r_formula = 0, r_plan = 0, r_tele = 0;
  for (Index d = 2; d <= 4; ++d) {
    const auto m = oqt_channel(d);
    const Matrix rho = random_density(d, rng);
    const Matrix delta = rho.trace() * Matrix::Identity(d, d) / double(d);
    const double dd = double(d * d);
    r_mix = std::max(r_mix, (rho / dd + (dd - 1.0) / dd * m.apply(rho) - delta).cwiseAbs().maxCoeff());
    r_formula = std::max(r_formula, (m.apply(rho) - m.formula(rho)).cwiseAbs().maxCoeff());
  }
  for (int k = 0; k < 5; ++k) {
    const MPS psi = canonicalize(random_mps(4, 2, 2, rng), Canonical::left);
    const SiteOperators ops{{0, random_hermitian(2, rng)}, {3, random_hermitian(2, rng)}};
    const auto rec = oqt_reconstruct(oqt_prepare_plan(psi), ops);
    r_plan = std::max(r_plan, std::abs(rec.value - expectation_product(psi, ops)));
  }
  {
    // single segment: the all-success branch carries the state itself
    const MPS psi = canonicalize(random_mps(2, 2, 2, rng), Canonical::left);
    const auto plan = oqt_prepare_plan(psi);
    const Matrix sigma = oqt_postselected_state(plan);
    const Vector v = to_statevector(psi);
    r_tele = (sigma / sigma.trace() - projector(v)).norm();
  }
  return {{"oqt", "mixing identity", r_mix, 1e-14},
          {"oqt", "failure map matches its formula", r_formula, 1e-14},
          {"oqt", "plan reproduces MPS expectations (N=4)", r_plan, 1e-8},
          {"oqt", "single segment state", r_tele, 1e-12}};
}

inline CheckList verify_thermal(std::uint64_t) {
  double r_exact = 0, r_trotter = 0;
  for (int model = 0; model < 2; ++model)
    for (double beta : {0.25, 0.5, 1.0}) {
      const auto h = model == 0 ? build_tfim(3, 1.0, 1.0) : build_heisenberg(3, 1.0);
      const std::vector<Index> dims(3, 2);
      const std::vector<int> site{0};
      ThermalJob job;
      job.observable = embed(gates::pauli_x(), site, dims) + 0.5 * Matrix::Identity(8, 8);
      job.hamiltonian = h;
      job.beta = beta;
      job.epsilon = 1e-3;
      const double o = oracle::thermal_exact(job.observable, dense(h), beta);
      r_exact = std::max(r_exact, std::abs(thermal_value(job).value - o));
      job.evolution = TimeEvolution::trotter;
      r_trotter = std::max(r_trotter, std::abs(thermal_value(job).value - o));
    }
  const double r_trunc = std::abs(choose_truncation(1.0, 1.0, 1e-3) - 7.0);
  return {{"thermal", "exact evolution within 1e-3", r_exact, 1e-3},
          {"thermal", "Trotter evolution within 5e-3", r_trotter, 5e-3},
          {"thermal", "truncation order at beta||H|| = 1", r_trunc, 0.0}};
}

inline CheckList verify_amplitude(std::uint64_t seed) {
  Rng rng(seed);
  double r_had = 0, r_cswap = 0, r_trans = 0, r_dec = 0, r_elem = 0, r_refl = 0, r_ent = 0;
  for (int k = 0; k < 30; ++k) {
    const Index d = Index{1} << (1 + k % 3);
    const Matrix u = random_unitary(d, rng);
    const Vector a = random_state(d, rng), b = random_state(d, rng);
    r_had = std::max(r_had, std::abs(hadamard_test(u, a).value - a.dot(u * a)));
    if (d <= 4) {
      const auto e = Eigen::ComplexEigenSolver<Matrix>(u);
      Vector lambda = e.eigenvectors().col(0);
      lambda.normalize();
      r_cswap = std::max(r_cswap, std::abs(dqc1_cswap_estimate(u, a, lambda).value - hadamard_test(u, a).value));
    }
    r_trans = std::max(r_trans, std::abs(transition_amplitude(a, u, b).amplitude.value - a.dot(u * b)));
    const Matrix h = random_hermitian(d, rng);
    const auto dec = unitary_decompose(h);
    r_dec = std::max({r_dec, unitarity_defect(dec.u_plus), unitarity_defect(dec.u_minus),
                      (dec.scale * (dec.u_plus + dec.u_minus) + dec.shift * Matrix::Identity(d, d) - h).norm()});
    r_elem = std::max(r_elem, std::abs(general_matrix_element(a, h, b).value - a.dot(h * b)));
    const auto rf = reflection(a);
    r_refl = std::max({r_refl, (rf.r * rf.r - Matrix::Identity(d, d)).norm(), (rf.u.col(0) - a).norm()});
  }
  for (int k = 0; k < 5; ++k) {
    const Matrix rho = 0.5 * random_density(4, rng) + 0.5 * Matrix::Identity(4, 4) / 4.0;
    r_ent = std::max(r_ent, std::abs(entropy(modular_hamiltonian(rho)).value - oracle::entropy_exact(rho)));
  }
  return {{"amplitude", "Hadamard test equals inner product", r_had, 1e-12},
          {"amplitude", "controlled-swap estimator equals Hadamard test", r_cswap, 1e-8},
          {"amplitude", "reflection assembly equals transition amplitude", r_trans, 1e-10},
          {"amplitude", "two-unitary decomposition", r_dec, 1e-10},
          {"amplitude", "general matrix element", r_elem, 1e-8},
          {"amplitude", "reflection construction", r_refl, 1e-10},
          {"amplitude", "entropy from modular Hamiltonian", r_ent, 1e-2}};
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"duality", "mps", "network", "oqt", "thermal", "amplitude", "all"};
  return names;
}

inline CheckList verify(const std::string& suite, std::uint64_t seed = 2024) {
  CheckList out;
  auto add = [&](const CheckList& c) { out.insert(out.end(), c.begin(), c.end()); };
  const bool all = suite == "all";
  if (std::find(suite_names().begin(), suite_names().end(), suite) == suite_names().end())
    throw Error(ErrorKind::invalid_argument, epsim::detail::cat("unknown suite \"", suite, "\""));
  if (all || suite == "duality") {
    add(verify_duality(seed));
    add(verify_binary(seed));
  }
  if (all || suite == "mps") add(verify_mps(seed));
  if (all || suite == "network") add(verify_network(seed));
  if (all || suite == "oqt") add(verify_oqt(seed));
  if (all || suite == "thermal") add(verify_thermal(seed));
  if (all || suite == "amplitude") add(verify_amplitude(seed));
  return out;
}

inline Json to_json(const CheckList& checks) {
  Json list = Json::array();
  bool ok = true;
  for (const auto& c : checks) {
    list.push_back({{"suite", c.suite}, {"name", c.name}, {"residual", c.residual}, {"threshold", c.threshold},
                    {"pass", c.pass()}});
    ok = ok && c.pass();
  }
  return {{"schema_version", io::kSchemaVersion}, {"checks", list}, {"pass", ok}};
}

}  // namespace epsim::experiment
