// Drives the built command-line tool as a subprocess.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "marker_nav/scenario_io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kCli = MARKER_NAV_CLI;
const fs::path kScenarios = MARKER_NAV_SCENARIO_DIR;

struct Result {
  int code = -1;
  std::string err;
};

Result run(const std::string& args, const std::string& env = "") {
  const fs::path err = fs::temp_directory_path() / "marker_nav_cli_stderr.txt";
  const std::string cmd = env + " " + kCli.string() + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("marker_nav_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST(Cli, SimulateReferenceScenario) {
  const fs::path out = scratch("sim");
  const Result r = run("simulate " + (kScenarios / "reference_scenario.json").string() + " --out " + out.string());
  EXPECT_EQ(r.code, 0) << r.err;
  const auto report = marker_nav::report_from_json(marker_nav::json::parse(slurp(out / "report.json")));
  const std::string csv = slurp(out / "trajectory.csv");
  EXPECT_EQ(count_lines(csv), static_cast<std::size_t>(report.result.steps_used) + 1);
  EXPECT_EQ(csv.substr(0, csv.find("\r\n")), marker_nav::kTrajectoryHeader);
  EXPECT_EQ(report.seed, 1u);
}

TEST(Cli, SimulateIsDeterministic) {
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  const std::string cfg = (kScenarios / "reference_scenario.json").string();
  run("simulate " + cfg + " --seed 7 --out " + a.string());
  run("simulate " + cfg + " --seed 7 --out " + b.string());
  const std::string ca = slurp(a / "trajectory.csv");
  EXPECT_FALSE(ca.empty());
  EXPECT_EQ(marker_nav::fnv1a64(ca), marker_nav::fnv1a64(slurp(b / "trajectory.csv")));
}

TEST(Cli, ConfigErrorNamesKey) {
  const fs::path d = scratch("bad");
  std::ofstream(d / "bad.json") << R"({"schema_version": 1, "dt": -0.1})";
  const Result r = run("simulate " + (d / "bad.json").string() + " --out " + d.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("'dt'"), std::string::npos) << r.err;
  EXPECT_EQ(run("simulate " + (d / "missing.json").string()).code, 1);
  EXPECT_EQ(run("simulate " + (kScenarios / "reference_scenario.json").string() + " --policy best").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
}

TEST(Cli, TimeoutExitCode) {
  const fs::path d = scratch("timeout");
  std::ofstream(d / "short.json") << R"({"schema_version": 1, "max_steps": 25})";
  const Result r = run("simulate " + (d / "short.json").string() + " --out " + d.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(fs::exists(d / "report.json"));
}

TEST(Cli, CompareWritesAggregate) {
  const fs::path d = scratch("cmp");
  const Result r = run("compare " + (kScenarios / "reference_scenario.json").string() + " --seeds 1..3 --out " + d.string());
  EXPECT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(d / "compare.csv");
  EXPECT_EQ(count_lines(csv), 5u);
  EXPECT_NE(csv.find("aggregate,"), std::string::npos);
}

TEST(Cli, CompareIsThreadCountIndependent) {
  const fs::path a = scratch("thr_a");
  const fs::path b = scratch("thr_b");
  const std::string cfg = (kScenarios / "reference_scenario.json").string();
  run("compare " + cfg + " --seeds 1..3 --out " + a.string(), "MARKER_NAV_THREADS=1");
  run("compare " + cfg + " --seeds 1..3 --out " + b.string(), "MARKER_NAV_THREADS=3");
  EXPECT_EQ(slurp(a / "compare.csv"), slurp(b / "compare.csv"));
}

TEST(Cli, CompareZeroNoisePoliciesAgree) {
  const fs::path d = scratch("cmp0");
  run("compare " + (kScenarios / "zero_noise.json").string() + " --seeds 1..1 --out " + d.string());
  const std::string csv = slurp(d / "compare.csv");
  const std::string row = csv.substr(csv.find("\r\n") + 2, csv.find("\r\n", csv.find("\r\n") + 2) - csv.find("\r\n") - 2);
  // seed, then three columns per policy: both halves must match.
  std::vector<std::string> f;
  std::stringstream ss(row);
  for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
  ASSERT_EQ(f.size(), 7u);
  EXPECT_EQ(f[1], "1");
  EXPECT_EQ(f[1], f[4]);
  EXPECT_EQ(f[2], f[5]);
  EXPECT_EQ(f[3], f[6]);
}

TEST(Cli, CompareEmptyRangeFails) {
  const fs::path d = scratch("cmp_empty");
  EXPECT_EQ(run("compare " + (kScenarios / "reference_scenario.json").string() + " --seeds 5..4 --out " + d.string()).code, 1);
  EXPECT_EQ(run("compare " + (kScenarios / "reference_scenario.json").string() + " --seeds x --out " + d.string()).code, 1);
}

TEST(Cli, BenchSingleTrial) {
  const fs::path d = scratch("bench");
  const Result r = run("bench --sigma 1 --range 2.5 --tilt 15 --trials 1 --prior-noise 0.05,3 --out " + d.string());
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(slurp(d / "bench.csv")), 2u);
}

TEST(Cli, BenchRejectsBadEnvelope) {
  const fs::path d = scratch("bench_bad");
  EXPECT_EQ(run("bench --trials 0 --out " + d.string()).code, 1);
  EXPECT_EQ(run("bench --range -1 --out " + d.string()).code, 1);
  EXPECT_EQ(run("bench --prior-noise 0.05 --out " + d.string()).code, 1);
}
