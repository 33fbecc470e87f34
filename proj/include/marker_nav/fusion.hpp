#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include "marker_nav/error.hpp"
#include "marker_nav/geometry.hpp"
#include "marker_nav/kinematics.hpp"

namespace marker_nav {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Linear Kalman filter over [x, y, psi, vx, vy, psi_dot] with a
/// constant-velocity transition and an identity measurement model.
struct FilterState {
  Vec6 x_hat = Vec6::Zero();
  Mat6 P = Mat6::Identity();

  PlanarState planar() const { return {x_hat(0), x_hat(1), x_hat(2)}; }
};

struct NoiseConfig {
  Mat6 Q = Vec6(1e-4, 1e-4, 1e-4, 1e-2, 1e-2, 1e-2).asDiagonal();
  Mat6 R = Vec6(2.5e-3, 2.5e-3, 4e-3, 1e-2, 1e-2, 1e-2).asDiagonal();
};

/// Measurement variance used for pose rows when the camera saw nothing.
inline constexpr double kMaskedVariance = 1e12;

struct Observation {
  Vec6 z = Vec6::Zero();
  bool pose_part_valid = true;
};

inline Mat6 transition_matrix(double dt) {
  Mat6 a = Mat6::Identity();
  a.topRightCorner<3, 3>() = dt * Eigen::Matrix3d::Identity();
  return a;
}

inline Mat6 symmetrized(const Mat6& m) { return 0.5 * (m + m.transpose()); }

inline FilterState predict(const FilterState& s, double dt, const NoiseConfig& noise) {
  const Mat6 a = transition_matrix(dt);
  FilterState out;
  out.x_hat = a * s.x_hat;
  out.x_hat(2) = wrap_angle(out.x_hat(2));
  out.P = symmetrized(a * s.P * a.transpose() + noise.Q);
  return out;
}

/// Measurement update with H = I. When the pose part is invalid the pose rows
/// of R are replaced by kMaskedVariance, so the same fixed-shape update runs.
inline FilterState update(const FilterState& prior, const Observation& obs,
                          const NoiseConfig& noise) {
  Mat6 r = noise.R;
  if (!obs.pose_part_valid) {
    r.topRows<3>().setZero();
    r.leftCols<3>().setZero();
    r.topLeftCorner<3, 3>() = kMaskedVariance * Eigen::Matrix3d::Identity();
  }
  const Mat6 s = prior.P + r;
  const Eigen::FullPivLU<Mat6> lu(s);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::SingularInnovation, "P + R is singular");
  }
  const Mat6 gain = prior.P * lu.inverse();

  Vec6 innovation = obs.z - prior.x_hat;
  innovation(2) = wrap_angle(innovation(2));

  FilterState out;
  out.x_hat = prior.x_hat + gain * innovation;
  out.x_hat(2) = wrap_angle(out.x_hat(2));
  out.P = symmetrized((Mat6::Identity() - gain) * prior.P);
  return out;
}

/// Camera pose part from the selected vehicle pose; velocity part from the
/// odometer mapped through the bicycle model at heading `psi_ref`.
inline Observation assemble_observation(const RigidTransform& selected_pose,
                                        const OdometryReading& odo, double psi_ref,
                                        const BicycleParams& params) {
  const PlanarState pose = to_planar(selected_pose);
  const WorldVelocity v = body_to_world(odo.v_w, odo.delta_r, psi_ref, params);
  Observation out;
  out.z << pose.x, pose.y, pose.psi, v.vx, v.vy, v.psi_dot;
  return out;
}

/// Initial filter state: the first camera pose at rest.
inline FilterState initial_state(const PlanarState& pose, const Vec6& p0_diag) {
  FilterState s;
  s.x_hat << pose.x, pose.y, wrap_angle(pose.psi), 0.0, 0.0, 0.0;
  s.P = p0_diag.asDiagonal();
  return s;
}

}  // namespace marker_nav
