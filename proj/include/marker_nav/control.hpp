#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "marker_nav/error.hpp"
#include "marker_nav/geometry.hpp"
#include "marker_nav/kinematics.hpp"

namespace marker_nav {

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.10;
};

struct ControllerGains {
  double p1 = 0.3;     ///< throttle per metre
  double p2 = 0.01;    ///< throttle per metre-step
  double u_max = 1.0;
};

struct ControlCommand {
  double delta_rd = 0.0;
  double throttle = 0.0;
};

inline double distance_to(const PlanarState& s, const Waypoint& wp) {
  return std::hypot(wp.x - s.x, wp.y - s.y);
}

/// Angle between the bearing to the waypoint and the velocity direction
/// (psi + beta), wrapped to (-pi, pi]. Positive means the waypoint is to the left.
inline double lookahead_angle(const PlanarState& s, double beta, const Waypoint& wp) {
  if (distance_to(s, wp) < 1e-9) throw Error(ErrorCode::AtWaypoint, "vehicle is on the waypoint");
  return wrap_angle(std::atan2(wp.y - s.y, wp.x - s.x) - s.psi - beta);
}

/// Ackermann steering toward a point at distance `lookahead` and angle `alpha`.
inline double steering_command(double alpha, double lookahead, double beta,
                               const BicycleParams& params) {
  const double delta =
      std::atan(2.0 * params.wheelbase * std::sin(alpha) / (lookahead * std::cos(beta)));
  return clamp_steering(delta, params);
}

struct ThrottleOutput {
  double u = 0.0;
  double accumulator = 0.0;
};

/// PI throttle on distance-to-go. The running sum is clamped so the integral
/// term alone never exceeds u_max.
inline ThrottleOutput throttle_command(double lookahead, double accumulator,
                                       const ControllerGains& gains) {
  double acc = accumulator + lookahead;
  if (gains.p2 > 0.0) acc = std::min(acc, gains.u_max / gains.p2);
  const double u = std::clamp(gains.p1 * lookahead + gains.p2 * acc, 0.0, gains.u_max);
  return {u, acc};
}

/// Boundary inclusive.
inline bool waypoint_reached(const PlanarState& s, const Waypoint& wp) {
  return distance_to(s, wp) <= wp.radius;
}

/// Waypoint sequencing around the steering and throttle laws.
class WaypointFollower {
 public:
  WaypointFollower(std::vector<Waypoint> waypoints, ControllerGains gains, BicycleParams params)
      : waypoints_(std::move(waypoints)), gains_(gains), params_(params) {}

  bool done() const { return active_ >= waypoints_.size(); }
  std::size_t active_index() const { return active_; }
  double accumulator() const { return accumulator_; }
  const std::vector<Waypoint>& waypoints() const { return waypoints_; }

  /// Advances past every waypoint already reached by `estimate`; returns true
  /// if the active waypoint changed.
  bool advance(const PlanarState& estimate) {
    bool changed = false;
    while (!done() && waypoint_reached(estimate, waypoints_[active_])) {
      ++active_;
      accumulator_ = 0.0;
      changed = true;
    }
    return changed;
  }

  /// Command toward the active waypoint. A stop command once all are done.
  ControlCommand command(const PlanarState& estimate, double beta) {
    if (done()) return {};
    const Waypoint& wp = waypoints_[active_];
    const double ld = distance_to(estimate, wp);
    const double alpha = lookahead_angle(estimate, beta, wp);
    const ThrottleOutput t = throttle_command(ld, accumulator_, gains_);
    accumulator_ = t.accumulator;
    return {steering_command(alpha, ld, beta, params_), t.u};
  }

 private:
  std::vector<Waypoint> waypoints_;
  ControllerGains gains_;
  BicycleParams params_;
  std::size_t active_ = 0;
  double accumulator_ = 0.0;
};

}  // namespace marker_nav
