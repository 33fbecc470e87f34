#pragma once

#include <cmath>
#include <limits>
#include <string_view>

#include "marker_nav/camera.hpp"
#include "marker_nav/error.hpp"
#include "marker_nav/fusion.hpp"
#include "marker_nav/geometry.hpp"
#include "marker_nav/planar_pose.hpp"

namespace marker_nav {

/// Default e2 weight for configured runs: metres^2 scaled to pixels^2 for a
/// 460 px focal length at 2.5 m.
inline constexpr double kDefaultW2 = (460.0 / 2.5) * (460.0 / 2.5);

enum class Candidate { a, b };

inline std::string_view to_string(Candidate c) { return c == Candidate::a ? "a" : "b"; }

/// e = e1 + w2 * e2. e1 is in pixels^2 and e2 in metres^2; w2 = 1 gives the plain sum.
struct CostBreakdown {
  Candidate candidate = Candidate::a;
  double e1 = 0.0;
  double e2 = 0.0;
  double e = 0.0;
};

enum class SelectionPolicy {
  ours,      ///< smallest e1 + e2 against the filter prior
  method_a,  ///< smallest reprojection error only
};

inline std::string_view to_string(SelectionPolicy p) {
  return p == SelectionPolicy::ours ? "ours" : "method_a";
}

/// World-to-vehicle pose of the predicted planar state; velocity rows ignored.
inline RigidTransform prior_pose(const FilterState& a_priori) {
  return from_planar(a_priori.planar());
}

/// Sum over marker corners of the squared distance, in the vehicle frame,
/// between the corner placed by `candidate` and by `prior`.
inline double object_space_error(const RigidTransform& candidate, const RigidTransform& prior,
                                 const MarkerModel& marker) {
  double e2 = 0.0;
  for (const auto& p : marker.corners_world()) e2 += (candidate * p - prior * p).squaredNorm();
  return e2;
}

inline CostBreakdown total_cost(const RigidTransform& candidate, const RigidTransform& prior,
                                const CameraRig& rig, const MarkerModel& marker,
                                const MarkerObservation& obs, double w2 = 1.0,
                                Candidate id = Candidate::a) {
  CostBreakdown c;
  c.candidate = id;
  c.e1 = reprojection_error(rig, candidate, marker, obs);
  c.e2 = object_space_error(candidate, prior, marker);
  c.e = c.e1 + w2 * c.e2;
  return c;
}

struct Selection {
  Candidate chosen = Candidate::a;
  RigidTransform pose;
  CostBreakdown cost_a;
  CostBreakdown cost_b;
};

namespace detail {

inline Selection pick(const AmbiguousPosePair& pair, const CostBreakdown& a,
                      const CostBreakdown& b, bool use_total) {
  const double ka = use_total ? a.e : a.e1;
  const double kb = use_total ? b.e : b.e1;
  if (!std::isfinite(ka) && !std::isfinite(kb)) {
    throw Error(ErrorCode::BothInvalid, "both candidates have infinite cost");
  }
  Candidate chosen = Candidate::a;
  if (std::abs(ka - kb) <= 1e-12) {
    chosen = b.e1 < a.e1 ? Candidate::b : Candidate::a;
  } else if (kb < ka) {
    chosen = Candidate::b;
  }
  return {chosen, chosen == Candidate::a ? pair.pose_a : pair.pose_b, a, b};
}

}  // namespace detail

/// Pick the candidate with the smaller feature-level cost e. Ties (|de| <= 1e-12)
/// go to the smaller e1, then to pose_a. Throws BothInvalid if neither cost is finite.
inline Selection select(const AmbiguousPosePair& pair, const RigidTransform& prior,
                        const CameraRig& rig, const MarkerModel& marker,
                        const MarkerObservation& obs, double w2 = 1.0) {
  const CostBreakdown a = total_cost(pair.pose_a, prior, rig, marker, obs, w2, Candidate::a);
  const CostBreakdown b = total_cost(pair.pose_b, prior, rig, marker, obs, w2, Candidate::b);
  return detail::pick(pair, a, b, true);
}

/// Baseline rule: the candidate with the smaller reprojection error wins.
/// Costs are still reported in full (against `prior`) for logging.
inline Selection select_by_reprojection(const AmbiguousPosePair& pair, const RigidTransform& prior,
                                        const CameraRig& rig, const MarkerModel& marker,
                                        const MarkerObservation& obs, double w2 = 1.0) {
  const CostBreakdown a = total_cost(pair.pose_a, prior, rig, marker, obs, w2, Candidate::a);
  const CostBreakdown b = total_cost(pair.pose_b, prior, rig, marker, obs, w2, Candidate::b);
  return detail::pick(pair, a, b, false);
}

inline Selection select_with_policy(SelectionPolicy policy, const AmbiguousPosePair& pair,
                                    const RigidTransform& prior, const CameraRig& rig,
                                    const MarkerModel& marker, const MarkerObservation& obs,
                                    double w2 = 1.0) {
  return policy == SelectionPolicy::ours ? select(pair, prior, rig, marker, obs, w2)
                                         : select_by_reprojection(pair, prior, rig, marker, obs, w2);
}

}  // namespace marker_nav
