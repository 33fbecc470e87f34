#pragma once

#include <algorithm>
#include <cmath>

#include "marker_nav/geometry.hpp"

namespace marker_nav {

/// Bicycle-model geometry. The centre of gravity sits mid-wheelbase (lf = lr).
struct BicycleParams {
  double wheelbase = 0.256;      ///< l, metres
  double steering_limit = 0.5;   ///< symmetric, radians

  double lf() const { return wheelbase / 2.0; }
  double lr() const { return wheelbase / 2.0; }
  bool is_valid() const { return wheelbase > 0.0 && steering_limit > 0.0; }
};

struct OdometryReading {
  double v_w = 0.0;      ///< wheel speed, m/s
  double delta_r = 0.0;  ///< recorded steering angle, rad
};

struct WorldVelocity {
  double vx = 0.0;
  double vy = 0.0;
  double psi_dot = 0.0;
};

/// Sideslip at the centre of gravity: atan(tan(delta) / 2).
inline double sideslip(double delta_r) { return std::atan(0.5 * std::tan(delta_r)); }

/// Turning radius l / (cos(beta) tan(delta)); infinite when driving straight.
inline double turning_radius(double delta_r, const BicycleParams& params) {
  return params.wheelbase / (std::cos(sideslip(delta_r)) * std::tan(delta_r));
}

/// v / R_r written as v cos(beta) tan(delta) / l so that delta = 0 needs no special case.
inline double yaw_rate(double v_w, double delta_r, const BicycleParams& params) {
  return v_w * std::cos(sideslip(delta_r)) * std::tan(delta_r) / params.wheelbase;
}

inline WorldVelocity body_to_world(double v_w, double delta_r, double psi,
                                   const BicycleParams& params) {
  const double heading = sideslip(delta_r) + psi;
  return {v_w * std::cos(heading), v_w * std::sin(heading), yaw_rate(v_w, delta_r, params)};
}

/// One explicit Euler step of the world-frame velocity model.
inline PlanarState integrate(const PlanarState& s, double v_w, double delta_r, double dt,
                             const BicycleParams& params) {
  const WorldVelocity v = body_to_world(v_w, delta_r, s.psi, params);
  return {s.x + v.vx * dt, s.y + v.vy * dt, wrap_angle(s.psi + v.psi_dot * dt)};
}

inline double clamp_steering(double delta, const BicycleParams& params) {
  return std::clamp(delta, -params.steering_limit, params.steering_limit);
}

}  // namespace marker_nav
