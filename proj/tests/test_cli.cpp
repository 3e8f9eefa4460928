#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "epsim/io.hpp"

namespace fs = std::filesystem;
using epsim::io::Json;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch() {
  const auto dir = fs::temp_directory_path() / "epsim_cli_test";
  fs::create_directories(dir);
  return dir;
}

Result cli(const std::string& args, const std::string& env = "") {
  const auto dir = scratch();
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = env + " '" + std::string(EPSIM_CLI_PATH) + "' " + args + " > '" + out.string() + "' 2> '" +
                          err.string() + "'";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string config(const std::string& name) { return "'" + std::string(EPSIM_CONFIG_DIR) + "/" + name + "'"; }

Json run_config(const std::string& name, const std::string& extra = "", const std::string& env = "") {
  const auto r = cli("run --config " + config(name) + " " + extra, env);
  EXPECT_EQ(r.code, 0) << name << ": " << r.err;
  return Json::parse(r.out);
}

}  // namespace

TEST(Cli, DynamicsTrotterMatchesOracle) {
  const auto j = run_config("dynamics_tfim.json");
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["task"], "dynamics");
  EXPECT_EQ(j["status"], "ok");
  EXPECT_LT(j["abs_error"].get<double>(), 1e-8);
  EXPECT_TRUE(j.contains("timing"));
  EXPECT_EQ(j["config"]["evaluator"], "exact");
}

TEST(Cli, EveryShippedConfigRuns) {
  for (const char* name : {"dynamics_regions.json", "dynamics_cnot.json", "thermal_tfim.json", "thermal_trotter.json",
                           "entropy_random.json", "amplitude_random.json", "duality.json"}) {
    const auto j = run_config(name);
    EXPECT_EQ(j["schema_version"], 1) << name;
    EXPECT_EQ(j["status"], "ok") << name;
    EXPECT_LT(j["abs_error"].get<double>(), 1e-2) << name;
  }
}

TEST(Cli, ProductPlusStateUnderCnot) {
  // CNOT maps |++> to itself, so <X_0> = <X_1> = 1
  const auto j = run_config("dynamics_cnot.json");
  EXPECT_NEAR(j["value"].get<double>(), 1.0, 1e-12);
}

TEST(Cli, ThermalAtZeroBetaIsTrace) {
  const auto j = run_config("thermal_beta0.json");
  EXPECT_NEAR(j["value"].get<double>(), 4.0, 1e-12);
  EXPECT_LT(j["abs_error"].get<double>(), 1e-12);
}

TEST(Cli, AmplitudeIdentityIsOne) {
  const auto j = run_config("amplitude_identity.json");
  EXPECT_NEAR(j["value"][0].get<double>(), 1.0, 1e-10);
  EXPECT_NEAR(j["value"][1].get<double>(), 0.0, 1e-10);
}

TEST(Cli, SampledWithinFourSigma) {
  const auto j = run_config("dynamics_sampled.json");
  const double se = j["stderr"].get<double>();
  EXPECT_GT(se, 0.0);
  EXPECT_LT(j["abs_error"].get<double>(), 4.0 * se);
}

TEST(Cli, SameSeedSameReport) {
  for (const char* name : {"dynamics_sampled.json", "entropy_random.json", "amplitude_random.json"}) {
    auto a = run_config(name, "--seed 19");
    auto b = run_config(name, "--seed 19");
    a.erase("timing");
    b.erase("timing");
    EXPECT_EQ(a, b) << name;
    EXPECT_EQ(a["seed"], 19);
  }
  auto c = run_config("dynamics_sampled.json", "--seed 20");
  EXPECT_NE(c["value"], run_config("dynamics_sampled.json", "--seed 19")["value"]);
}

TEST(Cli, EvaluatorOverride) {
  const auto exact = run_config("dynamics_regions.json", "--evaluator exact");
  const auto regions = run_config("dynamics_regions.json");
  EXPECT_EQ(exact["config"]["evaluator"], "exact");
  EXPECT_NEAR(exact["value"].get<double>(), regions["value"].get<double>(), 1e-10);
}

TEST(Cli, OutFileAndThreadCap) {
  const auto path = scratch() / "report.json";
  fs::remove(path);
  const auto r = cli("run --config " + config("thermal_tfim.json") + " --out '" + path.string() + "'", "EPSIM_MAX_THREADS=1");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = Json::parse(slurp(path));
  EXPECT_EQ(j["timing"]["threads"], 1);
  EXPECT_EQ(j["schema_version"], 1);
}

TEST(Cli, ErrorsAreJsonOnStderrWithCodeTwo) {
  const auto dir = scratch();
  const auto bad = dir / "bad.json";
  std::ofstream(bad) << R"({"schema_version": 1, "task": "thermal", "job": {"hamiltonian": {"model": "tfim", "n_sites": 2}, "beta": -1}})";
  const auto r = cli("run --config '" + bad.string() + "'");
  EXPECT_EQ(r.code, 2);
  const auto j = Json::parse(r.err);
  EXPECT_EQ(j["status"], "error");
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_TRUE(j.contains("message"));

  std::ofstream(bad) << R"({"schema_version": 1, "task": "teleport"})";
  EXPECT_EQ(cli("run --config '" + bad.string() + "'").code, 2);
  EXPECT_EQ(cli("run --config " + config("duality.json") + " --task nonsense").code, 2);
}

TEST(Cli, VerifySuites) {
  const auto r = cli("verify --task duality");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS duality"), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
  const auto path = scratch() / "verify.json";
  ASSERT_EQ(cli("verify --task amplitude --out '" + path.string() + "'").code, 0);
  const auto j = Json::parse(slurp(path));
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_NE(cli("verify --task bogus").code, 0);
}
