#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "vmsd/app.hpp"

using namespace vmsd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vmsd_test_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> v;
  std::istringstream in(line);
  for (std::string cell; std::getline(in, cell, ',');) v.push_back(cell);
  return v;
}

const char* kZero = "[run]\nscenario = zero\n[mesh]\nM = 2\nnx = 4\nnv = 4\n";

RunConfig zero_config(const fs::path& out) {
  RunConfig c = parse_config(kZero);
  c.out_dir = out.string();
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(VMSD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "t.conf");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, ParsesDefaultsAndOverrides) {
  const RunConfig c = parse_config("[run]\nscenario = coupled-gaussian\nc_delta = 0.25\n[mesh]\nM = 8\nnx = 16\nnv = 16\nT = 0.3\n[picard]\nmax_iter = 5\n");
  EXPECT_EQ(c.scenario, "coupled-gaussian");
  EXPECT_EQ(c.degree, 1);
  EXPECT_DOUBLE_EQ(c.c_delta, 0.25);
  EXPECT_EQ(c.M, 8);
  EXPECT_DOUBLE_EQ(c.scenario_data().T, 0.3);
  EXPECT_EQ(c.picard_max_iter, 5);
  EXPECT_DOUBLE_EQ(c.picard_tol, 1e-8);
  EXPECT_EQ(c.out_dir, "out");
}

TEST(Config, MissingRequiredKeyIsNamed) {
  EXPECT_NE(error_of("[run]\nscenario = zero\n[mesh]\nM = 2\nnv = 4\n").find("mesh.nx"), std::string::npos);
  EXPECT_NE(error_of("[mesh]\nM = 2\nnx = 4\nnv = 4\n").find("run.scenario"), std::string::npos);
}

TEST(Config, RejectsUnknownAndInvalidInput) {
  EXPECT_NE(error_of(std::string(kZero) + "resolution = 3\n").find("resolution"), std::string::npos);
  EXPECT_NE(error_of(std::string(kZero) + "[solver]\nx = 1\n").find("solver"), std::string::npos);
  EXPECT_NE(error_of("[run]\nscenario = plasma\n[mesh]\nM = 2\nnx = 4\nnv = 4\n").find("coupled-gaussian"), std::string::npos);
  EXPECT_NE(error_of("[run]\nscenario = zero\n[mesh]\nM = two\nnx = 4\nnv = 4\n").find("mesh.M"), std::string::npos);
  EXPECT_NE(error_of("[run]\nscenario = zero\ndegree = 5\n[mesh]\nM = 2\nnx = 4\nnv = 4\n").find("degree"), std::string::npos);
  EXPECT_NE(error_of("[run]\nscenario = zero\n[mesh]\nM = 0\nnx = 4\nnv = 4\n").find("mesh.M"), std::string::npos);
  EXPECT_FALSE(error_of("[run]\nscenario = zero\n[mesh]\nM = 2\nnx = 4\nnv = 4\nx_min = 1\nx_max = -1\n").empty());
  EXPECT_FALSE(error_of("[run\nscenario = zero\n").empty());
}

TEST(Config, HashFollowsText) {
  EXPECT_EQ(parse_config(kZero).hash, parse_config(kZero).hash);
  EXPECT_NE(parse_config(kZero).hash, parse_config(std::string(kZero) + "\n").hash);
  EXPECT_EQ(hex64(0x1234), "0000000000001234");
  EXPECT_EQ(fnv1a(""), 1469598103934665603ull);
}

TEST(Solve, ZeroScenarioWritesAllZeroCsvs) {
  const fs::path out = scratch("zero");
  std::ostringstream log;
  EXPECT_EQ(cmd_solve(zero_config(out), log), kSuccess);
  // Value columns per file (coordinates excluded).
  const std::vector<std::pair<std::string, std::vector<int>>> files{
      {"fields.csv", {2, 3, 4}}, {"distribution.csv", {4}}, {"increments.csv", {1, 2, 3, 4}}, {"estimator.csv", {3, 4, 5}},
      {"diagnostics.csv", {2, 3, 4, 5}}};
  for (const auto& [name, cols] : files) {
    const auto L = lines(out / name);
    ASSERT_GE(L.size(), 3u) << name;
    for (std::size_t i = 2; i < L.size(); ++i) {
      const auto cells = split(L[i]);
      for (int c : cols) EXPECT_EQ(std::stod(cells.at(c)), 0.0) << name << " line " << i;
    }
  }
}

TEST(Solve, GoldenHeaders) {
  const fs::path out = scratch("headers");
  const RunConfig c = zero_config(out);
  std::ostringstream log;
  cmd_solve(c, log);
  const std::string prov = "# vmsd 0.1.0 config=" + hex64(c.hash) + " command=solve";
  const std::vector<std::pair<std::string, std::string>> golden{
      {"increments.csv", "iteration,f_increment,W_increment,f_norm,W_norm,linear_iterations"},
      {"fields.csv", "t,x,E1,E2,B"},
      {"distribution.csv", "t,x,v1,v2,f"},
      {"diagnostics.csv", "slab,t,gauss_residual,total_mass,boundary_mass,undershoot,linear_iterations"},
      {"estimator.csv", "level,estimator,h,hR1,hR2,eta,true_err,effectivity"}};
  for (const auto& [name, header] : golden) {
    const auto L = lines(out / name);
    ASSERT_GE(L.size(), 2u) << name;
    EXPECT_EQ(L[0], prov) << name;
    EXPECT_EQ(L[1], header) << name;
  }
}

TEST(Study, RatesTableHeaderAndLevelGuard) {
  const fs::path out = scratch("study");
  RunConfig c = parse_config("[run]\nscenario = wave-subsystem\n[mesh]\nM = 2\nnx = 4\nnv = 1\n");
  c.out_dir = out.string();
  c.levels = 2;
  std::ostringstream log;
  EXPECT_THROW(cmd_study(c, log), ConfigError);
  c.levels = 3;
  EXPECT_EQ(cmd_study(c, log), kSuccess);
  const auto L = lines(out / "rates.csv");
  ASSERT_EQ(L.size(), 5u);
  EXPECT_EQ(L[1], "level,M,nx,nv,h,l2_error,hm1_error,eta,effectivity,rate_l2,rate_hm1,rate_eta");
  EXPECT_NE(L[0].find("command=study"), std::string::npos);
}

TEST(VerifyDual, EmptyBatchWarnsAndSucceeds) {
  RunConfig c = zero_config(scratch("empty"));
  c.verify_samples = c.verify_paths = 0;
  std::ostringstream log;
  EXPECT_EQ(cmd_verify_dual(c, log), kSuccess);
  EXPECT_NE(log.str().find("warning"), std::string::npos);
}

TEST(VerifyDual, MutationIsReported) {
  RunConfig c = parse_config("[run]\nscenario = coupled-gaussian\n[mesh]\nM = 2\nnx = 4\nnv = 4\n[verify]\nsamples = 2\npaths = 0\nmutate_phi2 = true\n");
  c.out_dir = scratch("mutant").string();
  std::ostringstream log;
  EXPECT_EQ(cmd_verify_dual(c, log), kVerificationFailure);
  c.mutate_phi2 = false;
  EXPECT_EQ(cmd_verify_dual(c, log), kSuccess);
}

TEST(Binary, ExitCodes) {
  const fs::path dir = scratch("exit");
  const fs::path ok = write_config(dir, "ok.conf", std::string(kZero) + "[output]\ndir = " + (dir / "o").string() + "\n");
  EXPECT_EQ(run_cli("solve --config " + ok.string()), 0);
  EXPECT_EQ(run_cli("estimate --config " + ok.string()), 0);
  EXPECT_EQ(run_cli("solve --config " + (dir / "missing.conf").string()), 2);
  EXPECT_EQ(run_cli("solve --config " + write_config(dir, "bad.conf", "[run]\nscenario = zero\n").string()), 2);
  EXPECT_EQ(run_cli("launch --config " + ok.string()), 2);
  EXPECT_EQ(run_cli("study --config " + ok.string() + " --levels 2"), 2);
  const fs::path slow = write_config(dir, "slow.conf",
                                     "[run]\nscenario = coupled-gaussian\n[mesh]\nM = 2\nnx = 4\nnv = 4\n[picard]\nmax_iter = 1\n[output]\ndir = " +
                                         (dir / "s").string() + "\n");
  EXPECT_EQ(run_cli("solve --config " + slow.string()), 3);
  const fs::path mutant = write_config(dir, "mutant.conf",
                                       "[run]\nscenario = coupled-gaussian\n[mesh]\nM = 2\nnx = 4\nnv = 4\n[verify]\nsamples = 1\npaths = 0\n"
                                       "mutate_phi2 = true\n[output]\ndir = " +
                                           (dir / "m").string() + "\n");
  EXPECT_EQ(run_cli("verify-dual --config " + mutant.string()), 4);
}

TEST(Binary, RepeatedRunsAreBitIdentical) {
  const fs::path dir = scratch("determinism");
  const std::string body = "[run]\nscenario = coupled-gaussian\n[mesh]\nM = 2\nnx = 4\nnv = 4\n";
  const fs::path cfg = write_config(dir, "c.conf", body);
  ASSERT_EQ(run_cli("solve --config " + cfg.string() + " --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli("solve --config " + cfg.string() + " --out " + (dir / "b").string()), 0);
  for (const char* f : {"increments.csv", "fields.csv", "distribution.csv", "diagnostics.csv", "estimator.csv"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}
