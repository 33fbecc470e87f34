#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <span>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SVD>

#include "marker_nav/camera.hpp"
#include "marker_nav/error.hpp"
#include "marker_nav/geometry.hpp"

namespace marker_nav {

/// Plane-to-image homography, scaled so h(2,2) = 1 (Frobenius norm 1 when that
/// entry is close to zero).
struct Homography {
  Mat3 h = Mat3::Identity();

  Vec2 apply(const Vec2& p) const {
    const Vec3 q = h * Vec3(p.x(), p.y(), 1.0);
    return q.head<2>() / q.z();
  }
};

namespace detail {

// Twice the signed triangle area, scaled by the longest edge so the test is
// insensitive to the units of the points.
inline bool nearly_collinear(const Vec2& a, const Vec2& b, const Vec2& c, double tol) {
  const Vec2 u = b - a;
  const Vec2 v = c - a;
  const double scale = std::max({u.squaredNorm(), v.squaredNorm(), (c - b).squaredNorm()});
  if (scale == 0.0) return true;
  return std::abs(u.x() * v.y() - u.y() * v.x()) / scale <= tol;
}

inline bool has_collinear_triple(std::span<const Vec2, 4> pts, double tol) {
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& a = pts[(i + 1) % 4];
    const auto& b = pts[(i + 2) % 4];
    const auto& c = pts[(i + 3) % 4];
    if (nearly_collinear(a, b, c, tol)) return true;
  }
  return false;
}

// Isotropic (Hartley) normalisation: centroid to origin, mean distance sqrt(2).
inline Mat3 isotropic_normalizer(std::span<const Vec2, 4> pts) {
  Vec2 c = Vec2::Zero();
  for (const auto& p : pts) c += p / 4.0;
  double mean = 0.0;
  for (const auto& p : pts) mean += (p - c).norm() / 4.0;
  const double s = std::sqrt(2.0) / mean;
  Mat3 t;
  t << s, 0.0, -s * c.x(),
       0.0, s, -s * c.y(),
       0.0, 0.0, 1.0;
  return t;
}

// Rotation taking the z axis onto the unit vector along `v`.
inline Mat3 rotate_z_onto(const Vec3& v) {
  const Vec3 a = v.normalized();
  const double c = a.z();
  Mat3 r;
  if (std::abs(1.0 + c) < 1e-12) {
    r = Mat3::Identity();
    r(1, 1) = -1.0;
    r(2, 2) = -1.0;
    return r;
  }
  const double d = 1.0 / (1.0 + c);
  r << 1.0 - a.x() * a.x() * d, -a.x() * a.y() * d, a.x(),
       -a.x() * a.y() * d, 1.0 - a.y() * a.y() * d, a.y(),
       -a.x(), -a.y(), 1.0 - (a.x() * a.x() + a.y() * a.y()) * d;
  return r;
}

// Least-squares translation for a known rotation, from planar model points and
// normalized image points: (R m + t) projects onto each image point.
inline Vec3 translation_for_rotation(const Mat3& r, std::span<const Vec2, 4> model,
                                     std::span<const Vec2, 4> image) {
  Eigen::Matrix<double, 8, 3> a;
  Eigen::Matrix<double, 8, 1> b;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec3 rm = r.leftCols<2>() * model[i];
    const auto row = static_cast<Eigen::Index>(2 * i);
    a.row(row) << 1.0, 0.0, -image[i].x();
    a.row(row + 1) << 0.0, 1.0, -image[i].y();
    b(row) = image[i].x() * rm.z() - rm.x();
    b(row + 1) = image[i].y() * rm.z() - rm.y();
  }
  return (a.transpose() * a).ldlt().solve(a.transpose() * b);
}

}  // namespace detail

/// Exact 4-point DLT homography from planar model points (metres) to
/// normalized image points. Throws DegenerateConfiguration when any three of
/// either point set are collinear.
inline Homography estimate_homography(std::span<const Vec2, 4> model_xy,
                                      std::span<const Vec2, 4> image) {
  constexpr double kCollinearTol = 1e-9;
  if (detail::has_collinear_triple(model_xy, kCollinearTol) ||
      detail::has_collinear_triple(image, kCollinearTol)) {
    throw Error(ErrorCode::DegenerateConfiguration, "three of the four points are collinear");
  }
  const Mat3 tm = detail::isotropic_normalizer(model_xy);
  const Mat3 ti = detail::isotropic_normalizer(image);

  Eigen::Matrix<double, 8, 9> a;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec3 m = tm * Vec3(model_xy[i].x(), model_xy[i].y(), 1.0);
    const Vec3 p = ti * Vec3(image[i].x(), image[i].y(), 1.0);
    const double u = p.x() / p.z();
    const double v = p.y() / p.z();
    const auto row = static_cast<Eigen::Index>(2 * i);
    a.row(row) << m.x(), m.y(), m.z(), 0.0, 0.0, 0.0, -u * m.x(), -u * m.y(), -u * m.z();
    a.row(row + 1) << 0.0, 0.0, 0.0, m.x(), m.y(), m.z(), -v * m.x(), -v * m.y(), -v * m.z();
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(a, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> hv = svd.matrixV().col(8);
  Mat3 hn;
  hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);

  Homography out;
  out.h = ti.inverse() * hn * tm;
  if (std::abs(out.h(2, 2)) > 1e-12) {
    out.h /= out.h(2, 2);
  } else {
    out.h /= out.h.norm();
  }
  if (std::abs(out.h.determinant()) <= 1e-12) {
    throw Error(ErrorCode::DegenerateConfiguration, "rank-deficient homography");
  }
  return out;
}

/// The two marker-to-camera poses explaining a plane homography, via the
/// first-order (infinitesimal plane) construction at the model origin.
///
/// `model_xy` are the marker-local corners (origin at the marker centre).
/// When one solution puts the marker behind the camera it is replaced by the
/// other; if neither is in front, NoValidPose is thrown. For a fronto-parallel
/// view both entries coincide.
inline std::array<RigidTransform, 2> decompose_planar(const Homography& hom,
                                                      std::span<const Vec2, 4> model_xy) {
  Mat3 h = hom.h;
  if (std::abs(h(2, 2)) < 1e-15) throw Error(ErrorCode::NoValidPose, "model origin maps to infinity");
  h /= h(2, 2);

  // Jacobian of the homography at the origin, and the image of the origin.
  Eigen::Matrix2d jac;
  jac << h(0, 0) - h(2, 0) * h(0, 2), h(0, 1) - h(2, 1) * h(0, 2),
         h(1, 0) - h(2, 0) * h(1, 2), h(1, 1) - h(2, 1) * h(1, 2);
  const double p = h(0, 2);
  const double q = h(1, 2);

  const Mat3 rv = detail::rotate_z_onto(Vec3(p, q, 1.0));
  Eigen::Matrix2d b;
  b << rv(0, 0) - p * rv(2, 0), rv(0, 1) - p * rv(2, 1),
       rv(1, 0) - q * rv(2, 0), rv(1, 1) - q * rv(2, 1);
  const Eigen::Matrix2d a = b.inverse() * jac;

  // Largest singular value of the 2x2 block.
  const double ata00 = a(0, 0) * a(0, 0) + a(0, 1) * a(0, 1);
  const double ata01 = a(0, 0) * a(1, 0) + a(0, 1) * a(1, 1);
  const double ata11 = a(1, 0) * a(1, 0) + a(1, 1) * a(1, 1);
  const double gamma = std::sqrt(
      0.5 * (ata00 + ata11 + std::sqrt((ata00 - ata11) * (ata00 - ata11) + 4.0 * ata01 * ata01)));
  const Eigen::Matrix2d rt = a / gamma;

  double b0 = std::sqrt(std::max(0.0, 1.0 - rt(0, 0) * rt(0, 0) - rt(1, 0) * rt(1, 0)));
  double b1 = std::sqrt(std::max(0.0, 1.0 - rt(0, 1) * rt(0, 1) - rt(1, 1) * rt(1, 1)));
  if (-rt(0, 0) * rt(0, 1) - rt(1, 0) * rt(1, 1) < 0.0) b1 = -b1;

  std::array<Vec2, 4> image;
  for (std::size_t i = 0; i < 4; ++i) image[i] = hom.apply(model_xy[i]);

  std::array<RigidTransform, 2> out;
  std::array<bool, 2> in_front{};
  for (int s = 0; s < 2; ++s) {
    const double sign = s == 0 ? 1.0 : -1.0;
    const Vec3 c0(rt(0, 0), rt(1, 0), sign * b0);
    const Vec3 c1(rt(0, 1), rt(1, 1), sign * b1);
    Mat3 r;
    r.col(0) = c0;
    r.col(1) = c1;
    r.col(2) = c0.cross(c1);
    r = project_to_so3(rv * r);
    const Vec3 t = detail::translation_for_rotation(r, model_xy, image);
    out[static_cast<std::size_t>(s)] = RigidTransform(r, t);
    in_front[static_cast<std::size_t>(s)] = t.z() > 0.0;
  }
  if (!in_front[0] && !in_front[1]) throw Error(ErrorCode::NoValidPose, "marker behind camera");
  if (!in_front[0]) out[0] = out[1];
  if (!in_front[1]) out[1] = out[0];
  return out;
}

struct LmOptions {
  int max_iterations = 100;
  double initial_lambda = 1e-3;
  double step_tolerance = 1e-10;
  double relative_cost_tolerance = 1e-12;
};

struct LmResult {
  RigidTransform pose;
  double cost = 0.0;  ///< joint reprojection error of `pose`, pixels^2
  int iterations = 0;
  bool converged = false;
};

/// Levenberg-Marquardt refinement of a world-to-vehicle pose against the
/// joint reprojection error of every camera in `obs`.
///
/// The local update is the 6-vector (w, rho) composed on the left:
/// T <- (exp(w), rho) * T. Damping is Marquardt-scaled (diag of J^T J), lambda
/// divided by 10 on an accepted step and multiplied by 10 on a rejected one.
inline LmResult lm_refine(const RigidTransform& initial, const CameraRig& rig,
                          const MarkerModel& marker, const MarkerObservation& obs,
                          const LmOptions& opts = {}) {
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  using Vec6 = Eigen::Matrix<double, 6, 1>;

  LmResult res;
  res.pose = initial;
  Eigen::VectorXd r;
  Eigen::Matrix<double, Eigen::Dynamic, 6> jac;
  if (!reprojection_residuals(rig, initial, marker, obs, r, &jac)) {
    res.cost = std::numeric_limits<double>::infinity();
    return res;
  }
  res.cost = r.squaredNorm();
  double lambda = opts.initial_lambda;

  while (res.iterations < opts.max_iterations) {
    ++res.iterations;
    const Mat6 jtj = jac.transpose() * jac;
    const Vec6 g = jac.transpose() * r;
    bool accepted = false;
    while (!accepted) {
      Mat6 damped = jtj;
      for (int d = 0; d < 6; ++d) damped(d, d) += lambda * std::max(jtj(d, d), 1e-12);
      const Vec6 delta = -damped.ldlt().solve(g);
      if (!delta.allFinite() || delta.norm() < opts.step_tolerance) {
        res.converged = true;
        return res;
      }
      const RigidTransform step(so3_exp(delta.head<3>()), delta.tail<3>());
      const RigidTransform trial = step * res.pose;
      Eigen::VectorXd r_trial;
      Eigen::Matrix<double, Eigen::Dynamic, 6> jac_trial;
      const bool ok = reprojection_residuals(rig, trial, marker, obs, r_trial, &jac_trial);
      const double trial_cost = ok ? r_trial.squaredNorm() : std::numeric_limits<double>::infinity();
      if (trial_cost < res.cost) {
        const double rel = (res.cost - trial_cost) / res.cost;
        res.pose = trial;
        res.cost = trial_cost;
        r = std::move(r_trial);
        jac = std::move(jac_trial);
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        if (rel < opts.relative_cost_tolerance) {
          res.converged = true;
          return res;
        }
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          // Nothing downhill at any damping: a local minimum to working precision.
          res.converged = true;
          return res;
        }
      }
    }
  }
  return res;
}

/// The two refined candidate vehicle poses of one frame.
struct AmbiguousPosePair {
  RigidTransform pose_a;
  RigidTransform pose_b;
  double e1_a = 0.0;  ///< pixels^2
  double e1_b = 0.0;
};

/// Signed-area magnitude of the quadrilateral spanned by four pixels.
inline double quad_area(const std::array<Vec2, 4>& px) {
  double s = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2& a = px[i];
    const Vec2& b = px[(i + 1) % 4];
    s += a.x() * b.y() - b.x() * a.y();
  }
  return std::abs(s) / 2.0;
}

/// Index into `obs.views` of the camera whose corners span the largest image area.
inline std::size_t seed_view(const MarkerObservation& obs) {
  std::size_t best = 0;
  for (std::size_t v = 1; v < obs.views.size(); ++v) {
    if (quad_area(obs.views[v].pixels) > quad_area(obs.views[best].pixels)) best = v;
  }
  return best;
}

/// The two unrefined world-to-vehicle poses from the seed camera's homography.
inline std::array<RigidTransform, 2> seed_candidates(const CameraRig& rig,
                                                     const MarkerModel& marker,
                                                     const MarkerObservation& obs) {
  if (obs.empty()) throw Error(ErrorCode::NoValidPose, "empty observation");
  const CameraCorners& view = obs.views[seed_view(obs)];
  const Camera& cam = rig[view.camera];
  std::array<Vec2, 4> normalized;
  for (std::size_t i = 0; i < 4; ++i) normalized[i] = cam.intrinsics.normalize(view.pixels[i]);

  const Homography h = estimate_homography(marker.local_corners(), normalized);
  const auto cam_from_marker = decompose_planar(h, marker.local_corners());

  // cam_from_world = T_jv * T_vw and cam_from_marker = cam_from_world * world_from_marker.
  const RigidTransform vehicle_from_cam = invert(cam.cam_from_vehicle);
  const RigidTransform marker_from_world = invert(marker.world_from_marker());
  return {vehicle_from_cam * cam_from_marker[0] * marker_from_world,
          vehicle_from_cam * cam_from_marker[1] * marker_from_world};
}

/// Both IPPE candidates lifted to world-to-vehicle poses and LM-refined against
/// the joint reprojection error of every observing camera.
inline AmbiguousPosePair candidates_vehicle_world(const CameraRig& rig, const MarkerModel& marker,
                                                  const MarkerObservation& obs,
                                                  const LmOptions& opts = {}) {
  const auto seeds = seed_candidates(rig, marker, obs);
  LmResult a = lm_refine(seeds[0], rig, marker, obs, opts);
  LmResult b = lm_refine(seeds[1], rig, marker, obs, opts);
  const bool a_ok = std::isfinite(a.cost);
  const bool b_ok = std::isfinite(b.cost);
  if (!a_ok && !b_ok) throw Error(ErrorCode::NoValidPose, "both candidates behind a camera");
  if (!a_ok) a = b;
  if (!b_ok) b = a;
  return {a.pose, b.pose, a.cost, b.cost};
}

}  // namespace marker_nav
