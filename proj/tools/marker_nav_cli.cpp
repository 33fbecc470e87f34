// marker_nav command line: simulate, compare and bench.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "marker_nav.hpp"

namespace fs = std::filesystem;
using namespace marker_nav;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitTimeout = 2;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("--out", "cannot create " + dir.string() + ": " + ec.message());
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const std::uint64_t s = std::stoull(text);
      return {s, s};
    }
    return {std::stoull(text.substr(0, dots)), std::stoull(text.substr(dots + 2))};
  } catch (const std::exception&) {
    throw ConfigError("--seeds", "expected A..B, got \"" + text + "\"");
  }
}

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 std::optional<std::string> policy, const fs::path& out_dir) {
  SimConfig cfg = load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (policy) cfg.selection_policy = parse_policy(*policy);
  ensure_dir(out_dir);

  const auto t0 = std::chrono::steady_clock::now();
  const SimRun run = run_scenario(cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  RunReport report{run.result, config_hash(cfg), cfg.seed, cfg.selection_policy, wall};
  write_atomic(out_dir / "trajectory.csv", trajectory_csv(run.log));
  write_atomic(out_dir / "report.json", to_json(report).dump(2) + "\n");

  const ScenarioResult& r = run.result;
  std::printf("policy %s seed %llu: %d/%d waypoints, %d steps, selection accuracy %.3f, rms %.4f m\n",
              std::string(to_string(cfg.selection_policy)).c_str(),
              static_cast<unsigned long long>(cfg.seed), r.waypoints_reached, r.waypoints_total,
              r.steps_used, r.selection_accuracy, r.rms_position_error);
  if (r.timed_out || r.waypoints_reached < r.waypoints_total) return kExitTimeout;
  return kExitOk;
}

int cmd_compare(const std::string& config_path, const std::string& seeds, const fs::path& out_dir) {
  const SimConfig cfg = load_config(config_path);
  const auto [first, last] = parse_seed_range(seeds);
  if (last < first) throw ConfigError("--seeds", "empty seed range");
  ensure_dir(out_dir);

  const auto rows = run_sweep(cfg, first, last, sweep_threads());
  write_atomic(out_dir / "compare.csv", compare_csv(rows));

  std::printf("%6s  %8s %8s %8s  %8s %8s %8s\n", "seed", "ours", "acc", "rms", "method_a", "acc", "rms");
  for (const auto& r : rows) {
    std::printf("%6llu  %8s %8.3f %8.4f  %8s %8.3f %8.4f\n", static_cast<unsigned long long>(r.seed),
                all_reached(r.ours) ? "ok" : "fail", r.ours.selection_accuracy,
                r.ours.rms_position_error, all_reached(r.method_a) ? "ok" : "fail",
                r.method_a.selection_accuracy, r.method_a.rms_position_error);
  }
  const SweepAggregate a = aggregate(rows);
  std::printf("%6s  %5d/%-2d %8.3f %8.4f  %5d/%-2d %8.3f %8.4f\n", "all", a.ours_success, a.seeds,
              a.ours_accuracy, a.ours_rms, a.method_a_success, a.seeds, a.method_a_accuracy,
              a.method_a_rms);
  return kExitOk;
}

int cmd_bench(BenchConfig cfg, double tilt_deg, const std::string& prior_noise, const fs::path& out_dir) {
  cfg.tilt_max = tilt_deg * kPi / 180.0;
  const auto comma = prior_noise.find(',');
  if (comma == std::string::npos) throw ConfigError("prior-noise", "expected pos,yaw_deg");
  try {
    cfg.prior_pos_sigma = std::stod(prior_noise.substr(0, comma));
    cfg.prior_yaw_sigma = std::stod(prior_noise.substr(comma + 1)) * kPi / 180.0;
  } catch (const std::exception&) {
    throw ConfigError("prior-noise", "expected pos,yaw_deg");
  }
  cfg.validate();
  ensure_dir(out_dir);

  const BenchSummary s = run_disambiguation_bench(cfg);
  write_atomic(out_dir / "bench.csv", bench_csv(s));

  std::printf("trials %zu  sigma %.3g px  range %.3g m  tilt <= %.3g deg  w2 %.6g\n", s.rows.size(),
              cfg.pixel_sigma, cfg.range, tilt_deg, cfg.w2);
  std::printf("%-22s %10s\n", "selector", "accuracy");
  std::printf("%-22s %10.3f\n", "reprojection only", s.accuracy_method_a);
  std::printf("%-22s %10.3f\n", "reprojection + prior", s.accuracy_ours);
  std::printf("distinct pairs %d, nearer candidate had higher e1 in %.3f of trials\n",
              s.distinct_pairs, s.nearer_higher_e1_fraction);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marker-based localization and waypoint following simulator"};
  app.require_subcommand(1);

  std::string sim_config;
  std::optional<std::uint64_t> sim_seed;
  std::optional<std::string> sim_policy;
  std::string sim_out = ".";
  auto* sim = app.add_subcommand("simulate", "Run one closed-loop scenario");
  sim->add_option("config", sim_config, "Scenario JSON")->required();
  sim->add_option("--seed", sim_seed, "Override the scenario seed");
  sim->add_option("--policy", sim_policy, "ours or method_a");
  sim->add_option("--out", sim_out, "Output directory");

  std::string cmp_config;
  std::string cmp_seeds;
  std::string cmp_out = ".";
  auto* cmp = app.add_subcommand("compare", "Run both selection policies over a seed range");
  cmp->add_option("config", cmp_config, "Scenario JSON")->required();
  cmp->add_option("--seeds", cmp_seeds, "Inclusive range A..B")->required();
  cmp->add_option("--out", cmp_out, "Output directory");

  BenchConfig bench_cfg;
  double bench_tilt = 15.0;
  std::string bench_prior = "0.05,3";
  std::string bench_out = ".";
  auto* bench = app.add_subcommand("bench", "Static disambiguation Monte-Carlo");
  bench->add_option("--sigma", bench_cfg.pixel_sigma, "Pixel noise sigma, px");
  bench->add_option("--range", bench_cfg.range, "Camera to marker distance, m");
  bench->add_option("--tilt", bench_tilt, "Maximum tilt off the marker normal, deg");
  bench->add_option("--trials", bench_cfg.trials, "Number of trials");
  bench->add_option("--prior-noise", bench_prior, "Prior noise pos_m,yaw_deg");
  bench->add_option("--seed", bench_cfg.seed, "RNG seed");
  bench->add_option("--w2", bench_cfg.w2, "Weight of the object-space error");
  bench->add_option("--out", bench_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(sim_config, sim_seed, sim_policy, sim_out);
    if (*cmp) return cmd_compare(cmp_config, cmp_seeds, cmp_out);
    if (*bench) return cmd_bench(bench_cfg, bench_tilt, bench_prior, bench_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
