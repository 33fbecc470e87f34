#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "marker_nav/camera.hpp"
#include "marker_nav/control.hpp"
#include "marker_nav/disambiguation.hpp"
#include "marker_nav/error.hpp"
#include "marker_nav/fusion.hpp"
#include "marker_nav/geometry.hpp"
#include "marker_nav/kinematics.hpp"
#include "marker_nav/planar_pose.hpp"

namespace marker_nav {

/// Intrinsics plus mounting of one rig camera, as written in scenario files.
struct CameraSpec {
  Intrinsics intrinsics;
  double mount_yaw = 0.0;          ///< optical axis yaw in the vehicle frame, rad
  Vec3 position = Vec3::Zero();    ///< optical centre in the vehicle frame, m
};

inline std::array<CameraSpec, kRigSize> default_camera_specs() {
  std::array<CameraSpec, kRigSize> specs;
  // front, right, rear, left; 0.10 m out from the centre, 0.226 m up
  const std::array<double, kRigSize> yaws = {0.0, -kPi / 2.0, kPi, kPi / 2.0};
  const std::array<Vec3, kRigSize> offsets = {Vec3(0.10, 0.0, 0.226), Vec3(0.0, -0.10, 0.226),
                                              Vec3(-0.10, 0.0, 0.226), Vec3(0.0, 0.10, 0.226)};
  for (std::size_t j = 0; j < kRigSize; ++j) {
    specs[j].mount_yaw = yaws[j];
    specs[j].position = offsets[j];
  }
  return specs;
}

inline CameraRig build_rig(const std::array<CameraSpec, kRigSize>& specs) {
  CameraRig rig;
  for (std::size_t j = 0; j < kRigSize; ++j) {
    rig.cameras[j] = {specs[j].intrinsics, camera_mount(specs[j].mount_yaw, specs[j].position)};
  }
  return rig;
}

struct SimConfig {
  double dt = 1.0 / 11.0;
  int substeps = 1;
  int max_steps = 600;
  std::uint64_t seed = 1;
  SelectionPolicy selection_policy = SelectionPolicy::ours;

  double pixel_noise_sigma = 1.0;
  double speed_noise_sigma = 0.02;
  double steer_noise_sigma = 0.01;

  std::array<CameraSpec, kRigSize> cameras = default_camera_specs();
  MarkerModel marker = MarkerModel::reference_default();
  BicycleParams bicycle;

  NoiseConfig filter_noise;
  Vec6 p0_diag = Vec6(0.25, 0.25, 0.25, 1.0, 1.0, 1.0);
  double w2 = kDefaultW2;
  LmOptions lm;

  ControllerGains gains;
  std::vector<Waypoint> waypoints = {{1.30, 0.00, 0.10}, {0.50, 0.65, 0.10}};
  /// A waypoint counts as reached only if the true position is within this
  /// distance when the controller declares it reached.
  double success_tolerance = 0.20;

  PlanarState initial_pose{2.00, -1.00, 2.20};
  /// Frames the vehicle holds still at start; the filter is initialised from
  /// all of them at once.
  int static_frames = 20;
  double k_u = 1.2;  ///< steady-state speed per unit throttle, m/s
  double tau = 0.4;  ///< speed lag time constant, s

  CameraRig rig() const { return build_rig(cameras); }

  /// Throws ConfigError naming the first offending key.
  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt", "must be positive");
    if (substeps < 1) throw ConfigError("substeps", "must be >= 1");
    if (max_steps < 1) throw ConfigError("max_steps", "must be positive");
    if (!(pixel_noise_sigma >= 0.0)) throw ConfigError("noise.pixel_sigma", "must be >= 0");
    if (!(speed_noise_sigma >= 0.0)) throw ConfigError("noise.speed_sigma", "must be >= 0");
    if (!(steer_noise_sigma >= 0.0)) throw ConfigError("noise.steer_sigma", "must be >= 0");
    for (const auto& c : cameras) {
      if (!c.intrinsics.is_valid()) throw ConfigError("rig.cameras", "invalid intrinsics");
    }
    if (!bicycle.is_valid()) throw ConfigError("vehicle", "wheelbase and steering_limit must be positive");
    if (!(w2 >= 0.0)) throw ConfigError("disambiguation.w2", "must be >= 0");
    if (gains.p1 < 0.0 || gains.p2 < 0.0) throw ConfigError("controller", "gains must be >= 0");
    if (!(gains.u_max > 0.0)) throw ConfigError("controller.u_max", "must be positive");
    if (waypoints.empty()) throw ConfigError("waypoints", "at least one waypoint required");
    for (const auto& w : waypoints) {
      if (!(w.radius > 0.0)) throw ConfigError("controller.waypoint_radius", "must be positive");
    }
    if (!(success_tolerance > 0.0)) throw ConfigError("controller.success_tolerance", "must be positive");
    if (!(k_u > 0.0)) throw ConfigError("plant.k_u", "must be positive");
    if (!(tau > 0.0)) throw ConfigError("plant.tau", "must be positive");
    if (lm.max_iterations < 1) throw ConfigError("lm.max_iterations", "must be >= 1");
    if (static_frames < 1) throw ConfigError("static_frames", "must be >= 1");
    for (int i = 0; i < 6; ++i) {
      if (!(p0_diag(i) > 0.0)) throw ConfigError("filter.p0_diag", "entries must be positive");
      if (!(filter_noise.Q(i, i) >= 0.0)) throw ConfigError("filter.q_diag", "entries must be >= 0");
      if (!(filter_noise.R(i, i) >= 0.0)) throw ConfigError("filter.r_diag", "entries must be >= 0");
    }
  }
};

using Rng = std::mt19937_64;

/// Normal draws consumed per step for the image noise (every camera and
/// corner, visible or not), keeping RNG streams aligned across policies.
inline constexpr int kPixelDrawsPerStep = static_cast<int>(kRigSize) * 4 * 2;

/// Noisy corners of every camera that sees the full marker, or nullopt.
/// Always consumes kPixelDrawsPerStep normal draws.
inline std::optional<MarkerObservation> synthesize_observation(const PlanarState& truth,
                                                               const CameraRig& rig,
                                                               const MarkerModel& marker,
                                                               double pixel_sigma, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<double, kPixelDrawsPerStep> draws;
  for (auto& d : draws) d = normal(rng);

  const RigidTransform t_vw = from_planar(truth);
  MarkerObservation obs;
  for (std::size_t j = 0; j < kRigSize; ++j) {
    std::array<CornerProjection, 4> corners;
    if (!camera_sees_marker(rig[j], t_vw, marker, &corners)) continue;
    CameraCorners view{j, {}};
    bool in_bounds = true;
    for (std::size_t i = 0; i < 4; ++i) {
      const std::size_t base = (j * 4 + i) * 2;
      view.pixels[i] = corners[i].pixel + pixel_sigma * Vec2(draws[base], draws[base + 1]);
      in_bounds = in_bounds && rig[j].intrinsics.in_image(view.pixels[i]);
    }
    if (in_bounds) obs.views.push_back(view);
  }
  if (obs.empty()) return std::nullopt;
  return obs;
}

/// Always consumes two normal draws.
inline OdometryReading synthesize_odometry(double v_true, double delta_true, double speed_sigma,
                                           double steer_sigma, const BicycleParams& params,
                                           Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double nv = normal(rng);
  const double nd = normal(rng);
  return {v_true + speed_sigma * nv, clamp_steering(delta_true + steer_sigma * nd, params)};
}

struct TruthState {
  PlanarState pose;
  double speed = 0.0;
  double steering = 0.0;  ///< steering angle currently applied
};

/// First-order speed lag v' = v + dt (k_u u - v) / tau, then an Euler pose step
/// at the start-of-step speed, with the commanded steering applied at once.
inline TruthState step_truth(const TruthState& truth, const ControlCommand& cmd,
                             const SimConfig& cfg) {
  TruthState next = truth;
  next.steering = clamp_steering(cmd.delta_rd, cfg.bicycle);
  const double h = cfg.dt / cfg.substeps;
  for (int s = 0; s < cfg.substeps; ++s) {
    next.pose = integrate(next.pose, next.speed, next.steering, h, cfg.bicycle);
    next.speed += h * (cfg.k_u * cmd.throttle - next.speed) / cfg.tau;
  }
  return next;
}

/// The estimation half of the loop. It consumes only synthesized measurements.
class Estimator {
 public:
  struct Step {
    bool initialized_now = false;
    std::optional<AmbiguousPosePair> pair;
    std::optional<Selection> selection;
    FilterState prior;
    FilterState posterior;
  };

  Estimator(CameraRig rig, MarkerModel marker, BicycleParams params, NoiseConfig noise,
            Vec6 p0_diag, double dt, SelectionPolicy policy, double w2, LmOptions lm,
            int static_frames = 1)
      : rig_(rig), marker_(std::move(marker)), params_(params), noise_(noise), p0_(p0_diag),
        dt_(dt), policy_(policy), w2_(w2), lm_(lm), static_frames_(std::max(static_frames, 1)) {}

  explicit Estimator(const SimConfig& cfg)
      : Estimator(cfg.rig(), cfg.marker, cfg.bicycle, cfg.filter_noise, cfg.p0_diag, cfg.dt,
                  cfg.selection_policy, cfg.w2, cfg.lm, cfg.static_frames) {}

  /// True once the filter runs; before that the vehicle is assumed static and
  /// every view is stacked into one observation.
  bool initialized() const { return state_.has_value() && stacked_frames_ >= static_frames_; }
  bool has_estimate() const { return state_.has_value(); }
  const FilterState& state() const { return *state_; }

  Step step(const std::optional<MarkerObservation>& obs, const OdometryReading& odo) {
    Step out;
    if (!initialized()) {
      if (!obs) {
        if (!state_) throw Error(ErrorCode::NoValidPose, "cannot initialise without a marker view");
        out.prior = *state_;
        out.posterior = *state_;
        return out;
      }
      for (const auto& v : obs->views) stacked_.views.push_back(v);
      ++stacked_frames_;
      // No prior exists yet, so only the reprojection error over the stacked views decides.
      out.pair = candidates_vehicle_world(rig_, marker_, stacked_, lm_);
      out.selection = select_by_reprojection(*out.pair, out.pair->pose_a, rig_, marker_, stacked_, w2_);
      state_ = initial_state(to_planar(out.selection->pose), p0_);
      out.initialized_now = initialized();
      if (out.initialized_now) stacked_.views.clear();
      out.prior = *state_;
      out.posterior = *state_;
      return out;
    }

    out.prior = predict(*state_, dt_, noise_);
    std::optional<RigidTransform> measured;
    if (obs) {
      try {
        out.pair = candidates_vehicle_world(rig_, marker_, *obs, lm_);
        out.selection = select_with_policy(policy_, *out.pair, prior_pose(out.prior), rig_,
                                           marker_, *obs, w2_);
        measured = out.selection->pose;
      } catch (const Error&) {
        // Degenerate geometry or no valid candidate: prior-only pose this step.
        out.pair.reset();
        out.selection.reset();
      }
    }
    Observation z = assemble_observation(measured.value_or(prior_pose(out.prior)), odo,
                                         out.prior.x_hat(2), params_);
    z.pose_part_valid = measured.has_value();
    out.posterior = update(out.prior, z, noise_);
    state_ = out.posterior;
    return out;
  }

 private:
  CameraRig rig_;
  MarkerModel marker_;
  BicycleParams params_;
  NoiseConfig noise_;
  Vec6 p0_;
  double dt_;
  SelectionPolicy policy_;
  double w2_;
  LmOptions lm_;
  int static_frames_;
  int stacked_frames_ = 0;
  MarkerObservation stacked_;
  std::optional<FilterState> state_;
};

/// 3D distance from a candidate's vehicle position to the true one.
inline double candidate_position_error(const RigidTransform& candidate, const PlanarState& truth) {
  return (invert(candidate).translation() - Vec3(truth.x, truth.y, 0.0)).norm();
}

/// Which candidate is nearer the truth; nullopt when they are equally near
/// (within 1e-6 m), in which case either choice is correct.
inline std::optional<Candidate> nearer_candidate(const AmbiguousPosePair& pair,
                                                 const PlanarState& truth) {
  const double da = candidate_position_error(pair.pose_a, truth);
  const double db = candidate_position_error(pair.pose_b, truth);
  if (std::abs(da - db) <= 1e-6) return std::nullopt;
  return da < db ? Candidate::a : Candidate::b;
}

struct SimStep {
  int k = 0;
  double t = 0.0;
  TruthState truth;
  OdometryReading odometry;
  std::optional<MarkerObservation> observation;
  std::optional<AmbiguousPosePair> pair;
  std::optional<Selection> selection;
  std::optional<Candidate> nearer;  ///< nearer-to-truth candidate, when they differ
  FilterState prior;
  FilterState posterior;
  ControlCommand command;
  std::size_t waypoint_index = 0;
};

using SimLog = std::vector<SimStep>;

struct ScenarioResult {
  int waypoints_reached = 0;
  int waypoints_total = 0;
  int steps_used = 0;
  bool timed_out = false;
  double final_position_error = 0.0;    ///< true position to last waypoint, m
  double final_estimation_error = 0.0;  ///< estimate vs truth at the last step, m
  int visible_steps = 0;
  double selection_accuracy = 1.0;
  double rms_position_error = 0.0;      ///< estimate vs truth after initialisation, m
  double rms_yaw_error = 0.0;           ///< rad

  bool operator==(const ScenarioResult&) const = default;
};

struct SimRun {
  SimLog log;
  ScenarioResult result;
};

/// The closed loop: observe, estimate (initialise, predict, candidates, select,
/// update), steer and throttle toward the active waypoint, step the truth.
/// Runs until every waypoint is passed or `max_steps` is exhausted.
inline SimRun run_scenario(const SimConfig& cfg) {
  cfg.validate();
  const CameraRig rig = cfg.rig();
  Rng rng(cfg.seed);
  Estimator estimator(cfg);
  WaypointFollower follower(cfg.waypoints, cfg.gains, cfg.bicycle);

  SimRun run;
  ScenarioResult& res = run.result;
  res.waypoints_total = static_cast<int>(cfg.waypoints.size());
  TruthState truth{cfg.initial_pose, 0.0, 0.0};
  truth.pose.psi = wrap_angle(truth.pose.psi);
  int correct = 0;
  double sq_pos = 0.0;
  double sq_yaw = 0.0;
  int tracked = 0;

  for (int k = 0; k < cfg.max_steps; ++k) {
    SimStep rec;
    rec.k = k;
    rec.t = k * cfg.dt;
    rec.truth = truth;
    rec.observation = synthesize_observation(truth.pose, rig, cfg.marker, cfg.pixel_noise_sigma, rng);
    rec.odometry = synthesize_odometry(truth.speed, truth.steering, cfg.speed_noise_sigma,
                                       cfg.steer_noise_sigma, cfg.bicycle, rng);
    if (k == 0 && !rec.observation) {
      throw ConfigError("initial_pose", "marker is not visible from the initial pose");
    }

    Estimator::Step est = estimator.step(rec.observation, rec.odometry);
    rec.pair = est.pair;
    rec.selection = est.selection;
    rec.prior = est.prior;
    rec.posterior = est.posterior;
    if (rec.pair && rec.selection) {
      ++res.visible_steps;
      rec.nearer = nearer_candidate(*rec.pair, truth.pose);
      if (!rec.nearer || *rec.nearer == rec.selection->chosen) ++correct;
    }

    const PlanarState estimate = est.posterior.planar();
    const double pos_err = (estimate.position() - truth.pose.position()).norm();
    const double yaw_err = wrap_angle(estimate.psi - truth.pose.psi);
    // Errors count from filter initialisation on.
    if (estimator.initialized()) {
      sq_pos += pos_err * pos_err;
      sq_yaw += yaw_err * yaw_err;
      ++tracked;
    }
    res.final_estimation_error = pos_err;

    const std::size_t before = follower.active_index();
    if (estimator.initialized()) follower.advance(estimate);
    for (std::size_t w = before; w < follower.active_index(); ++w) {
      if (distance_to(truth.pose, cfg.waypoints[w]) <= cfg.success_tolerance) ++res.waypoints_reached;
    }
    rec.waypoint_index = follower.active_index();
    if (estimator.initialized()) rec.command = follower.command(estimate, sideslip(rec.odometry.delta_r));
    run.log.push_back(rec);
    res.steps_used = k + 1;
    if (follower.done()) break;
    truth = step_truth(truth, rec.command, cfg);
  }

  res.timed_out = !follower.done();
  const Waypoint& last = cfg.waypoints.back();
  res.final_position_error = distance_to(run.log.back().truth.pose, last);
  res.selection_accuracy = res.visible_steps > 0 ? static_cast<double>(correct) / res.visible_steps : 1.0;
  res.rms_position_error = tracked > 0 ? std::sqrt(sq_pos / tracked) : 0.0;
  res.rms_yaw_error = tracked > 0 ? std::sqrt(sq_yaw / tracked) : 0.0;
  return run;
}

}  // namespace marker_nav
