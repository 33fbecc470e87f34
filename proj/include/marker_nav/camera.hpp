#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "marker_nav/error.hpp"
#include "marker_nav/geometry.hpp"

namespace marker_nav {

/// Pinhole intrinsics, zero skew, no distortion.
struct Intrinsics {
  double fx = 460.0;
  double fy = 460.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx,
         0.0, fy, cy,
         0.0, 0.0, 1.0;
    return k;
  }

  /// Pixel to normalized image coordinates (K^-1 applied).
  Vec2 normalize(const Vec2& pixel) const {
    return {(pixel.x() - cx) / fx, (pixel.y() - cy) / fy};
  }

  bool in_image(const Vec2& pixel) const {
    return pixel.x() >= 0.0 && pixel.x() < width && pixel.y() >= 0.0 && pixel.y() < height;
  }

  bool is_valid() const {
    return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx >= 0.0 && cx < width &&
           cy >= 0.0 && cy < height;
  }
};

struct Camera {
  Intrinsics intrinsics;
  RigidTransform cam_from_vehicle;  ///< T_jv: vehicle-frame points to camera frame
};

inline constexpr std::size_t kRigSize = 4;

/// Four cameras indexed clockwise seen from above: 0 front, 1 right, 2 rear, 3 left.
struct CameraRig {
  std::array<Camera, kRigSize> cameras;

  const Camera& operator[](std::size_t j) const { return cameras[j]; }
};

/// Camera extrinsic for a camera whose optical axis is horizontal and points
/// along vehicle-frame yaw `mount_yaw`, with its optical centre at `position`.
inline RigidTransform camera_mount(double mount_yaw, const Vec3& position) {
  // Camera axes expressed in the vehicle frame: x right, y down, z forward.
  const Vec3 forward(std::cos(mount_yaw), std::sin(mount_yaw), 0.0);
  const Vec3 down(0.0, 0.0, -1.0);
  const Vec3 right = down.cross(forward);
  Mat3 vehicle_from_cam;
  vehicle_from_cam.col(0) = right;
  vehicle_from_cam.col(1) = down;
  vehicle_from_cam.col(2) = forward;
  return invert(RigidTransform(vehicle_from_cam, position));
}

/// Default stand-in rig: identical cameras at 0, -90, 180, +90 degrees of yaw,
/// each 0.10 m out from the vehicle centre along its axis, at `mount_height`.
inline CameraRig default_rig(const Intrinsics& intr = {}, double mount_height = 0.226,
                             double lever_arm = 0.10) {
  CameraRig rig;
  const std::array<double, kRigSize> yaws = {0.0, -kPi / 2.0, kPi, kPi / 2.0};
  for (std::size_t j = 0; j < kRigSize; ++j) {
    const Vec3 pos(lever_arm * std::cos(yaws[j]), lever_arm * std::sin(yaws[j]), mount_height);
    rig.cameras[j] = {intr, camera_mount(yaws[j], pos)};
  }
  return rig;
}

/// Square planar marker with four ordered world-frame corners.
///
/// Corner order follows the usual fiducial convention: seen from the front the
/// corners run top-left, top-right, bottom-right, bottom-left.
class MarkerModel {
 public:
  MarkerModel() = default;
  MarkerModel(const std::array<Vec3, 4>& corners_world, double side_length)
      : corners_(corners_world), side_(side_length) {
    validate();
    build_frame();
  }

  const std::array<Vec3, 4>& corners_world() const { return corners_; }
  double side_length() const { return side_; }

  /// Marker-local frame: origin at the centre, x along corner0->corner1,
  /// y along corner0->corner3, z = x cross y (pointing away from the front).
  const RigidTransform& world_from_marker() const { return world_from_marker_; }
  const std::array<Vec2, 4>& local_corners() const { return local_; }

  Vec3 center() const { return world_from_marker_.translation(); }

  /// Unit normal on the visible (front) side.
  Vec3 front_normal() const { return -world_from_marker_.rotation().col(2); }

  /// The reference marker: 0.172 m tag on the plane y = 1.47 m, facing -y.
  static MarkerModel reference_default() {
    return MarkerModel({Vec3(-0.086, 1.47, 0.312), Vec3(0.086, 1.47, 0.312),
                        Vec3(0.086, 1.47, 0.140), Vec3(-0.086, 1.47, 0.140)},
                       0.172);
  }

 private:
  void validate() const {
    if (!(side_ > 0.0)) throw ConfigError("marker.side_length", "must be positive");
    for (std::size_t i = 0; i < 4; ++i) {
      const double d = (corners_[(i + 1) % 4] - corners_[i]).norm();
      if (std::abs(d - side_) > 1e-9) {
        throw ConfigError("marker.corners", "consecutive corner distance " + std::to_string(d) +
                                                " differs from side_length");
      }
    }
    const Vec3 n = (corners_[1] - corners_[0]).cross(corners_[3] - corners_[0]);
    if (n.norm() < 1e-12) throw ConfigError("marker.corners", "corners are collinear");
    const Vec3 nn = n.normalized();
    const double off_plane = std::abs(nn.dot(corners_[2] - corners_[0]));
    if (off_plane > 1e-9) throw ConfigError("marker.corners", "corners are not coplanar");
  }

  void build_frame() {
    Vec3 c = Vec3::Zero();
    for (const auto& p : corners_) c += p / 4.0;
    const Vec3 ex = (corners_[1] - corners_[0]).normalized();
    Vec3 ey = corners_[3] - corners_[0];
    ey = (ey - ex.dot(ey) * ex).normalized();
    Mat3 r;
    r.col(0) = ex;
    r.col(1) = ey;
    r.col(2) = ex.cross(ey);
    world_from_marker_ = RigidTransform(r, c);
    for (std::size_t i = 0; i < 4; ++i) {
      const Vec3 d = corners_[i] - c;
      local_[i] = Vec2(ex.dot(d), ey.dot(d));
    }
  }

  std::array<Vec3, 4> corners_{};
  double side_ = 0.0;
  RigidTransform world_from_marker_;
  std::array<Vec2, 4> local_{};
};

struct CornerProjection {
  std::size_t camera = 0;  ///< rig index, 0 = front
  std::size_t corner = 0;  ///< 0..3
  Vec2 pixel = Vec2::Zero();
  double depth = 0.0;  ///< projective scalar s_ij
};

/// The four measured corners seen by one camera.
struct CameraCorners {
  std::size_t camera = 0;
  std::array<Vec2, 4> pixels{};
};

/// Corners measured in one frame, one entry per observing camera (sorted by index).
struct MarkerObservation {
  std::vector<CameraCorners> views;

  std::vector<std::size_t> visible_set() const {
    std::vector<std::size_t> set;
    for (const auto& v : views) set.push_back(v.camera);
    return set;
  }

  bool empty() const { return views.empty(); }

  /// One camera, or two adjacent cameras of the rig.
  bool has_valid_visible_set() const {
    if (views.size() == 1) return views[0].camera < kRigSize;
    if (views.size() != 2) return false;
    const std::size_t a = views[0].camera;
    const std::size_t b = views[1].camera;
    if (a >= kRigSize || b >= kRigSize || a == b) return false;
    return (a + 1) % kRigSize == b || (b + 1) % kRigSize == a;
  }
};

/// Pixel of a camera-frame point; nullopt when the point is not in front of the camera.
inline std::optional<Vec2> project_camera_point(const Intrinsics& intr, const Vec3& xc) {
  if (!(xc.z() > 0.0)) return std::nullopt;
  return Vec2(intr.fx * xc.x() / xc.z() + intr.cx, intr.fy * xc.y() / xc.z() + intr.cy);
}

/// Pinhole projection of a world point. Throws BehindCamera when depth <= 0.
inline CornerProjection project(const Intrinsics& intr, const RigidTransform& cam_from_world,
                                const Vec3& p_world) {
  const Vec3 xc = cam_from_world * p_world;
  const auto px = project_camera_point(intr, xc);
  if (!px) throw Error(ErrorCode::BehindCamera, "point depth " + std::to_string(xc.z()));
  CornerProjection out;
  out.pixel = *px;
  out.depth = xc.z();
  return out;
}

/// True when camera `j` images the whole marker from its front side.
inline bool camera_sees_marker(const Camera& cam, const RigidTransform& t_vw,
                               const MarkerModel& marker,
                               std::array<CornerProjection, 4>* out = nullptr) {
  const RigidTransform cam_from_world = cam.cam_from_vehicle * t_vw;
  const Vec3 cam_center = invert(cam_from_world).translation();
  if ((cam_center - marker.center()).dot(marker.front_normal()) <= 0.0) return false;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec3 xc = cam_from_world * marker.corners_world()[i];
    const auto px = project_camera_point(cam.intrinsics, xc);
    if (!px || !cam.intrinsics.in_image(*px)) return false;
    if (out) (*out)[i] = {0, i, *px, xc.z()};
  }
  return true;
}

/// Multi-camera projection of the marker. Cameras that cannot see the full,
/// front-facing marker contribute nothing.
inline std::vector<CornerProjection> project_rig(const CameraRig& rig, const RigidTransform& t_vw,
                                                 const MarkerModel& marker) {
  std::vector<CornerProjection> out;
  for (std::size_t j = 0; j < kRigSize; ++j) {
    std::array<CornerProjection, 4> corners;
    if (!camera_sees_marker(rig[j], t_vw, marker, &corners)) continue;
    for (auto& c : corners) {
      c.camera = j;
      out.push_back(c);
    }
  }
  return out;
}

/// Noise-free observation of the marker from `t_vw` (empty when unseen).
inline MarkerObservation observe(const CameraRig& rig, const RigidTransform& t_vw,
                                 const MarkerModel& marker) {
  MarkerObservation obs;
  for (const auto& p : project_rig(rig, t_vw, marker)) {
    if (obs.views.empty() || obs.views.back().camera != p.camera) obs.views.push_back({p.camera, {}});
    obs.views.back().pixels[p.corner] = p.pixel;
  }
  return obs;
}

/// Stacked residuals (predicted - measured) over every observed corner, with an
/// optional Jacobian w.r.t. the left update T <- (exp(w), rho) * T, columns
/// ordered (w, rho). Returns false if any corner falls behind its camera.
inline bool reprojection_residuals(const CameraRig& rig, const RigidTransform& t_vw,
                                   const MarkerModel& marker, const MarkerObservation& obs,
                                   Eigen::VectorXd& residuals,
                                   Eigen::Matrix<double, Eigen::Dynamic, 6>* jacobian = nullptr) {
  const auto rows = static_cast<Eigen::Index>(8 * obs.views.size());
  residuals.resize(rows);
  if (jacobian) jacobian->resize(rows, 6);
  Eigen::Index row = 0;
  for (const auto& view : obs.views) {
    const Camera& cam = rig[view.camera];
    const Intrinsics& k = cam.intrinsics;
    const Mat3& r_cv = cam.cam_from_vehicle.rotation();
    for (std::size_t i = 0; i < 4; ++i) {
      const Vec3 xv = t_vw * marker.corners_world()[i];
      const Vec3 xc = cam.cam_from_vehicle * xv;
      if (!(xc.z() > 0.0)) return false;
      const double iz = 1.0 / xc.z();
      residuals(row) = k.fx * xc.x() * iz + k.cx - view.pixels[i].x();
      residuals(row + 1) = k.fy * xc.y() * iz + k.cy - view.pixels[i].y();
      if (jacobian) {
        Eigen::Matrix<double, 2, 3> d_proj;
        d_proj << k.fx * iz, 0.0, -k.fx * xc.x() * iz * iz,
                  0.0, k.fy * iz, -k.fy * xc.y() * iz * iz;
        Eigen::Matrix<double, 3, 6> d_xv;
        d_xv.leftCols<3>() = -skew(xv);
        d_xv.rightCols<3>() = Mat3::Identity();
        jacobian->middleRows<2>(row) = d_proj * r_cv * d_xv;
      }
      row += 2;
    }
  }
  return true;
}

/// Joint reprojection error (pixels^2) summed over the cameras in the
/// observation; +inf when the pose puts a corner behind a camera.
inline double reprojection_error(const CameraRig& rig, const RigidTransform& t_vw,
                                 const MarkerModel& marker, const MarkerObservation& obs) {
  Eigen::VectorXd r;
  if (!reprojection_residuals(rig, t_vw, marker, obs, r)) {
    return std::numeric_limits<double>::infinity();
  }
  return r.squaredNorm();
}

}  // namespace marker_nav
