#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

namespace marker_nav {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

inline Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
inline Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
inline Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

/// Z-Y-X (yaw, pitch, roll) Euler angles to a rotation matrix.
inline Mat3 from_euler_zyx(double yaw, double pitch, double roll) {
  return rot_z(yaw) * rot_y(pitch) * rot_x(roll);
}

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

/// Rotation vector to rotation matrix (Rodrigues).
inline Mat3 so3_exp(const Vec3& w) {
  const double theta = w.norm();
  if (theta < 1e-12) return Mat3::Identity() + skew(w);
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

/// max |R^T R - I| over all entries.
inline double orthonormality_error(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

/// Nearest rotation matrix in the Frobenius sense.
inline Mat3 project_to_so3(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

/// Rigid-body transform in SE(3): p -> R p + t.
///
/// Vehicle poses use the "world to vehicle" reading throughout the library:
/// a T_vw maps world-frame points into the vehicle frame, and the vehicle's
/// pose in the world is its inverse.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  RigidTransform(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 operator*(const Vec3& p) const { return rotation_ * p + translation_; }

  RigidTransform operator*(const RigidTransform& b) const {
    Mat3 r = rotation_ * b.rotation_;
    if (orthonormality_error(r) > 1e-12) r = project_to_so3(r);
    return {r, rotation_ * b.translation_ + translation_};
  }

  RigidTransform inverse() const {
    const Mat3 rt = rotation_.transpose();
    return {rt, -(rt * translation_)};
  }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  bool is_valid(double tol = 1e-9) const {
    return rotation_.allFinite() && translation_.allFinite() &&
           orthonormality_error(rotation_) <= tol &&
           std::abs(rotation_.determinant() - 1.0) <= tol;
  }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) { return a * b; }
inline RigidTransform invert(const RigidTransform& t) { return t.inverse(); }
inline Vec3 transform_point(const RigidTransform& t, const Vec3& p) { return t * p; }

/// Geodesic angle between two rotations, radians.
inline double rotation_distance(const Mat3& a, const Mat3& b) {
  const Mat3 r = a.transpose() * b;
  const Vec3 s(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * s.norm(), 0.5 * (r.trace() - 1.0));
}

struct PlanarState {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;  ///< yaw, wrapped to (-pi, pi]

  Vec2 position() const { return {x, y}; }
};

/// Pose of the vehicle in the world, built from planar state (z, roll, pitch = 0).
inline RigidTransform pose_in_world(const PlanarState& s) {
  return {from_euler_zyx(s.psi, 0.0, 0.0), Vec3(s.x, s.y, 0.0)};
}

/// World-to-vehicle transform of a planar state.
inline RigidTransform from_planar(const PlanarState& s) { return invert(pose_in_world(s)); }

/// Planar state of a world-to-vehicle transform. Yaw is atan2(R10, R00) of the
/// pose-in-world rotation, which tolerates small roll/pitch noise.
inline PlanarState to_planar(const RigidTransform& t_vw) {
  const RigidTransform pose = invert(t_vw);
  const Mat3& r = pose.rotation();
  return {pose.translation().x(), pose.translation().y(),
          wrap_angle(std::atan2(r(1, 0), r(0, 0)))};
}

}  // namespace marker_nav
