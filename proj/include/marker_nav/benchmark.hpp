#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "marker_nav/camera.hpp"
#include "marker_nav/disambiguation.hpp"
#include "marker_nav/error.hpp"
#include "marker_nav/geometry.hpp"
#include "marker_nav/planar_pose.hpp"
#include "marker_nav/simulator.hpp"

namespace marker_nav {

/// Static Monte-Carlo envelope: the front camera views the marker from
/// `range` metres with a yaw tilt drawn uniformly in [-tilt_max, tilt_max].
struct BenchConfig {
  double pixel_sigma = 1.0;
  double range = 2.5;                ///< m
  double tilt_max = 15.0 * kPi / 180.0;
  int trials = 1000;
  double prior_pos_sigma = 0.05;     ///< m, per axis
  double prior_yaw_sigma = 3.0 * kPi / 180.0;
  double w2 = kDefaultW2;
  std::uint64_t seed = 1;
  double bearing_jitter = 10.0 * kPi / 180.0;  ///< marker offset from the optical axis
  Intrinsics intrinsics;
  MarkerModel marker = MarkerModel::reference_default();

  void validate() const {
    if (!(pixel_sigma >= 0.0)) throw ConfigError("sigma", "must be >= 0");
    if (!(range > 0.0)) throw ConfigError("range", "must be positive");
    if (!(tilt_max >= 0.0 && tilt_max < 80.0 * kPi / 180.0)) {
      throw ConfigError("tilt", "must be in [0, 80) degrees");
    }
    if (trials < 1) throw ConfigError("trials", "must be positive");
    if (!(prior_pos_sigma >= 0.0) || !(prior_yaw_sigma >= 0.0)) {
      throw ConfigError("prior-noise", "must be >= 0");
    }
  }
};

struct BenchRow {
  int trial = 0;
  double tilt = 0.0;  ///< rad
  CostBreakdown cost_a;
  CostBreakdown cost_b;
  double err_a = 0.0;  ///< candidate position error, m
  double err_b = 0.0;
  std::optional<Candidate> nearer;
  Candidate ours = Candidate::a;
  Candidate method_a = Candidate::a;
  bool ours_correct = true;
  bool method_a_correct = true;
  bool nearer_has_higher_e1 = false;
};

struct BenchSummary {
  std::vector<BenchRow> rows;
  double accuracy_ours = 0.0;
  double accuracy_method_a = 0.0;
  int distinct_pairs = 0;
  double nearer_higher_e1_fraction = 0.0;
};

/// Vehicle pose whose front camera sees the marker centre from `range` at yaw
/// `tilt` off the marker normal, with the marker `offset` rad off the optical axis.
inline PlanarState bench_viewpoint(const MarkerModel& marker, const CameraSpec& front, double range,
                                   double tilt, double offset) {
  const Vec3 n = marker.front_normal();
  const Vec3 dir = rot_z(tilt) * Vec3(n.x(), n.y(), 0.0).normalized();
  const Vec3 cam = marker.center() + range * dir;
  const double to_marker = std::atan2(-dir.y(), -dir.x());
  const double psi = wrap_angle(to_marker - offset - front.mount_yaw);
  const Vec3 lever = rot_z(psi) * front.position;
  return {cam.x() - lever.x(), cam.y() - lever.y(), psi};
}

inline BenchSummary run_disambiguation_bench(const BenchConfig& cfg) {
  cfg.validate();
  std::array<CameraSpec, kRigSize> specs = default_camera_specs();
  for (auto& s : specs) {
    s.intrinsics = cfg.intrinsics;
    s.position.z() = cfg.marker.center().z();
  }
  const CameraRig rig = build_rig(specs);
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  BenchSummary out;
  int ours_ok = 0;
  int a_ok = 0;
  int higher = 0;
  while (static_cast<int>(out.rows.size()) < cfg.trials) {
    const double tilt = cfg.tilt_max * unit(rng);
    const double offset = cfg.bearing_jitter * unit(rng);
    const PlanarState truth = bench_viewpoint(cfg.marker, specs[0], cfg.range, tilt, offset);
    const PlanarState prior_state{truth.x + cfg.prior_pos_sigma * normal(rng),
                                  truth.y + cfg.prior_pos_sigma * normal(rng),
                                  wrap_angle(truth.psi + cfg.prior_yaw_sigma * normal(rng))};
    const auto obs = synthesize_observation(truth, rig, cfg.marker, cfg.pixel_sigma, rng);
    if (!obs) continue;

    AmbiguousPosePair pair;
    try {
      pair = candidates_vehicle_world(rig, cfg.marker, *obs);
    } catch (const Error&) {
      continue;
    }
    const RigidTransform prior = from_planar(prior_state);
    const Selection ours = select(pair, prior, rig, cfg.marker, *obs, cfg.w2);
    const Selection base = select_by_reprojection(pair, prior, rig, cfg.marker, *obs, cfg.w2);

    BenchRow row;
    row.trial = static_cast<int>(out.rows.size());
    row.tilt = tilt;
    row.cost_a = ours.cost_a;
    row.cost_b = ours.cost_b;
    row.err_a = candidate_position_error(pair.pose_a, truth);
    row.err_b = candidate_position_error(pair.pose_b, truth);
    row.nearer = nearer_candidate(pair, truth);
    row.ours = ours.chosen;
    row.method_a = base.chosen;
    row.ours_correct = !row.nearer || *row.nearer == ours.chosen;
    row.method_a_correct = !row.nearer || *row.nearer == base.chosen;
    if (row.nearer) {
      ++out.distinct_pairs;
      const double e1_near = *row.nearer == Candidate::a ? pair.e1_a : pair.e1_b;
      const double e1_far = *row.nearer == Candidate::a ? pair.e1_b : pair.e1_a;
      row.nearer_has_higher_e1 = e1_near > e1_far;
    }
    ours_ok += row.ours_correct;
    a_ok += row.method_a_correct;
    higher += row.nearer_has_higher_e1;
    out.rows.push_back(row);
  }
  const double n = static_cast<double>(out.rows.size());
  out.accuracy_ours = ours_ok / n;
  out.accuracy_method_a = a_ok / n;
  out.nearer_higher_e1_fraction = higher / n;
  return out;
}

}  // namespace marker_nav
