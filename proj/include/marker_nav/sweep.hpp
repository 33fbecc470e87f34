#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "marker_nav/scenario_io.hpp"
#include "marker_nav/simulator.hpp"

namespace marker_nav {

/// Both policies on one seed. They see the same measurement noise because
/// each run draws from its own stream seeded identically.
struct SweepRow {
  std::uint64_t seed = 0;
  ScenarioResult ours;
  ScenarioResult method_a;
  std::uint64_t ours_csv_digest = 0;
  std::uint64_t method_a_csv_digest = 0;
};

struct SweepAggregate {
  int seeds = 0;
  int ours_success = 0;  ///< seeds with every waypoint reached
  int method_a_success = 0;
  double ours_accuracy = 0.0;  ///< mean per-seed selection accuracy
  double method_a_accuracy = 0.0;
  double ours_rms = 0.0;
  double method_a_rms = 0.0;
};

inline bool all_reached(const ScenarioResult& r) {
  return !r.timed_out && r.waypoints_reached == r.waypoints_total;
}

/// Worker count from MARKER_NAV_THREADS, else the hardware concurrency.
inline unsigned sweep_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MARKER_NAV_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = static_cast<unsigned>(v);
  }
  return n;
}

inline SweepRow run_seed(SimConfig cfg, std::uint64_t seed) {
  SweepRow row;
  row.seed = seed;
  cfg.seed = seed;
  cfg.selection_policy = SelectionPolicy::ours;
  const SimRun ours = run_scenario(cfg);
  cfg.selection_policy = SelectionPolicy::method_a;
  const SimRun base = run_scenario(cfg);
  row.ours = ours.result;
  row.method_a = base.result;
  row.ours_csv_digest = fnv1a64(trajectory_csv(ours.log));
  row.method_a_csv_digest = fnv1a64(trajectory_csv(base.log));
  return row;
}

/// Seeds first..last inclusive, in order, using up to `threads` workers.
inline std::vector<SweepRow> run_sweep(const SimConfig& cfg, std::uint64_t first,
                                       std::uint64_t last, unsigned threads) {
  if (last < first) throw ConfigError("seeds", "empty seed range");
  cfg.validate();
  const std::size_t n = static_cast<std::size_t>(last - first + 1);
  std::vector<SweepRow> rows(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        rows[i] = run_seed(cfg, first + i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned count = std::clamp<unsigned>(threads, 1u, static_cast<unsigned>(n));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

inline SweepAggregate aggregate(const std::vector<SweepRow>& rows) {
  SweepAggregate a;
  a.seeds = static_cast<int>(rows.size());
  for (const auto& r : rows) {
    a.ours_success += all_reached(r.ours);
    a.method_a_success += all_reached(r.method_a);
    a.ours_accuracy += r.ours.selection_accuracy;
    a.method_a_accuracy += r.method_a.selection_accuracy;
    a.ours_rms += r.ours.rms_position_error;
    a.method_a_rms += r.method_a.rms_position_error;
  }
  if (a.seeds > 0) {
    a.ours_accuracy /= a.seeds;
    a.method_a_accuracy /= a.seeds;
    a.ours_rms /= a.seeds;
    a.method_a_rms /= a.seeds;
  }
  return a;
}

inline constexpr const char* kCompareHeader =
    "seed,ours_success,ours_selection_accuracy,ours_rms_error,method_a_success,"
    "method_a_selection_accuracy,method_a_rms_error";

/// Per-seed rows, then one "aggregate" row whose success columns are counts.
inline std::string compare_csv(const std::vector<SweepRow>& rows) {
  std::string out = kCompareHeader;
  out += "\r\n";
  for (const auto& r : rows) {
    out += std::to_string(r.seed) + "," + (all_reached(r.ours) ? "1" : "0") + "," +
           csv_number(r.ours.selection_accuracy) + "," + csv_number(r.ours.rms_position_error) +
           "," + (all_reached(r.method_a) ? "1" : "0") + "," +
           csv_number(r.method_a.selection_accuracy) + "," +
           csv_number(r.method_a.rms_position_error) + "\r\n";
  }
  const SweepAggregate a = aggregate(rows);
  out += "aggregate," + std::to_string(a.ours_success) + "," + csv_number(a.ours_accuracy) + "," +
         csv_number(a.ours_rms) + "," + std::to_string(a.method_a_success) + "," +
         csv_number(a.method_a_accuracy) + "," + csv_number(a.method_a_rms) + "\r\n";
  return out;
}

}  // namespace marker_nav
