// epsim command-line runner: `epsim run --config cfg.json` and `epsim verify --task all`.

#include <iostream>

#include "CLI11.hpp"
#include "epsim/epsim.hpp"

namespace {

using epsim::io::Json;

void emit(const Json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << "\n";
  } else {
    epsim::io::write_file(out, j);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Channel-network simulation of quantum states, dynamics and thermal values"};
  app.require_subcommand(1);

  std::string config, task, out, evaluator;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "run the task described by a JSON config and write a report");
  run->add_option("--config", config, "config JSON path")->required()->check(CLI::ExistingFile);
  auto* run_task = run->add_option("--task", task, "override the config task (dynamics, thermal, entropy, amplitude, duality-check)");
  auto* run_seed = run->add_option("--seed", seed, "override the root seed");
  run->add_option("--out", out, "report path (stdout when omitted)");
  auto* run_eval = run->add_option("--evaluator", evaluator, "override the evaluator (exact, sampled, regions)");

  auto* verify = app.add_subcommand("verify", "run a property suite and print one line per check");
  std::string suite = "all";
  verify->add_option("--task", suite, "suite: duality, mps, network, oqt, thermal, amplitude, all")
      ->check(CLI::IsMember(epsim::experiment::suite_names()));
  auto* verify_seed = verify->add_option("--seed", seed, "root seed for the random instances");
  verify->add_option("--out", out, "summary JSON path");
  verify->add_option("--config", config, "unused; accepted for a uniform interface");
  verify->add_option("--evaluator", evaluator, "unused; accepted for a uniform interface");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      epsim::experiment::RunOptions opt;
      if (*run_task) opt.task = task;
      if (*run_seed) opt.seed = seed;
      if (*run_eval) opt.evaluator = evaluator;
      const auto cfg = epsim::io::read_file(config);
      const auto base = std::filesystem::path(config).parent_path();
      emit(epsim::experiment::run(cfg, base, opt), out);
      return 0;
    }
    const auto checks = epsim::experiment::verify(suite, *verify_seed ? seed : 2024);
    bool ok = true;
    for (const auto& c : checks) {
      std::cout << (c.pass() ? "PASS " : "FAIL ") << c.suite << ": " << c.name << "  residual " << c.residual
                << " (threshold " << c.threshold << ")\n";
      ok = ok && c.pass();
    }
    if (!out.empty()) epsim::io::write_file(out, epsim::experiment::to_json(checks));
    return ok ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << epsim::experiment::error_report(e).dump() << "\n";
    return 2;
  }
}
