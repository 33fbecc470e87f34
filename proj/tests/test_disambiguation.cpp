#include <gtest/gtest.h>

#include "marker_nav/benchmark.hpp"
#include "marker_nav/disambiguation.hpp"
#include "marker_nav/simulator.hpp"
#include "oracles.hpp"

using namespace marker_nav;

namespace {

struct Scene {
  MarkerModel marker = MarkerModel::reference_default();
  CameraRig rig = default_rig();
};

PlanarState view_state(const MarkerModel& m, double range, double tilt) {
  return bench_viewpoint(m, default_camera_specs()[0], range, tilt, 0.05);
}

}  // namespace

TEST(Disambiguation, PriorPose) {
  FilterState s;
  s.x_hat.setZero();
  const RigidTransform id = prior_pose(s);
  EXPECT_LE((id.matrix() - Mat4::Identity()).norm(), 0.0);

  s.x_hat << 1, 2, 0.3, 7, 8, 9;
  const RigidTransform t = prior_pose(s);
  EXPECT_LE((t.matrix() - from_planar({1, 2, 0.3}).matrix()).norm(), 1e-15);
  const PlanarState back = to_planar(t);
  EXPECT_NEAR(back.x, 1, 1e-12);
  EXPECT_NEAR(back.y, 2, 1e-12);
  EXPECT_NEAR(back.psi, 0.3, 1e-12);
}

TEST(Disambiguation, ObjectSpaceErrorExamples) {
  const MarkerModel m = MarkerModel::reference_default();
  const RigidTransform prior = from_planar({0.2, -0.4, 0.3});
  EXPECT_EQ(object_space_error(prior, prior, m), 0.0);

  const RigidTransform shifted = compose(RigidTransform::from_translation(Vec3(0.1, 0, 0)), prior);
  EXPECT_NEAR(object_space_error(shifted, prior, m), 0.04, 1e-12);

  // Prior at the world origin, so vehicle-frame corners equal world corners.
  const RigidTransform yawed(rot_z(10.0 * kPi / 180.0), Vec3::Zero());
  EXPECT_NEAR(object_space_error(yawed, RigidTransform::identity(), m), oracle::kE2Yaw10, 1e-12);
}

TEST(Disambiguation, TotalCostExamples) {
  Scene sc;
  const RigidTransform truth = from_planar(view_state(sc.marker, 1.5, 0.3));
  const MarkerObservation obs = observe(sc.rig, truth, sc.marker);
  const CostBreakdown c = total_cost(truth, truth, sc.rig, sc.marker, obs);
  EXPECT_LE(c.e, 1e-18);

  const RigidTransform offset = compose(RigidTransform::from_translation(Vec3(0.1, 0, 0)), truth);
  const CostBreakdown d = total_cost(truth, offset, sc.rig, sc.marker, obs);
  EXPECT_NEAR(d.e1, 0.0, 1e-18);
  EXPECT_NEAR(d.e, 0.04, 1e-12);
  const CostBreakdown w = total_cost(truth, offset, sc.rig, sc.marker, obs, 10.0);
  EXPECT_NEAR(w.e, 0.4, 1e-12);
}

TEST(Disambiguation, CostsAreAdditiveOnNoisyTrials) {
  Scene sc;
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const PlanarState s = view_state(sc.marker, 2.5, 0.2);
    const auto obs = synthesize_observation(s, sc.rig, sc.marker, 1.0, rng);
    ASSERT_TRUE(obs);
    const AmbiguousPosePair pair = candidates_vehicle_world(sc.rig, sc.marker, *obs);
    const RigidTransform prior = from_planar({s.x + 0.03, s.y - 0.02, s.psi + 0.02});
    const Selection sel = select(pair, prior, sc.rig, sc.marker, *obs, 7.0);
    for (const CostBreakdown* c : {&sel.cost_a, &sel.cost_b}) {
      const RigidTransform& pose = c->candidate == Candidate::a ? pair.pose_a : pair.pose_b;
      EXPECT_DOUBLE_EQ(c->e1, reprojection_error(sc.rig, pose, sc.marker, *obs));
      EXPECT_DOUBLE_EQ(c->e2, object_space_error(pose, prior, sc.marker));
      EXPECT_DOUBLE_EQ(c->e, c->e1 + 7.0 * c->e2);
      EXPECT_GE(c->e, c->e1);
      EXPECT_GE(c->e, c->e2);
    }
    const bool member = sel.pose.matrix() == pair.pose_a.matrix() || sel.pose.matrix() == pair.pose_b.matrix();
    EXPECT_TRUE(member);
  }
}

TEST(Disambiguation, TruthPriorSelectsTruthCandidate) {
  Scene sc;
  const PlanarState s = view_state(sc.marker, 2.0, 0.35);
  const RigidTransform truth = from_planar(s);
  const MarkerObservation obs = observe(sc.rig, truth, sc.marker);
  const AmbiguousPosePair pair = candidates_vehicle_world(sc.rig, sc.marker, obs);
  const std::optional<Candidate> nearer = nearer_candidate(pair, s);
  ASSERT_TRUE(nearer);
  EXPECT_EQ(select(pair, truth, sc.rig, sc.marker, obs).chosen, *nearer);
  // Same pair in the other order.
  const AmbiguousPosePair swapped{pair.pose_b, pair.pose_a, pair.e1_b, pair.e1_a};
  EXPECT_NE(select(swapped, truth, sc.rig, sc.marker, obs).chosen, *nearer);
}

TEST(Disambiguation, TieGoesToPoseA) {
  Scene sc;
  const RigidTransform truth = from_planar(view_state(sc.marker, 2.0, 0.3));
  const MarkerObservation obs = observe(sc.rig, truth, sc.marker);
  const AmbiguousPosePair pair{truth, truth, 0.0, 0.0};
  EXPECT_EQ(select(pair, truth, sc.rig, sc.marker, obs).chosen, Candidate::a);
  EXPECT_EQ(select_by_reprojection(pair, truth, sc.rig, sc.marker, obs).chosen, Candidate::a);
}

TEST(Disambiguation, BothInvalidThrows) {
  Scene sc;
  const RigidTransform truth = from_planar(view_state(sc.marker, 2.0, 0.3));
  const MarkerObservation obs = observe(sc.rig, truth, sc.marker);
  const RigidTransform turned = compose(RigidTransform(rot_z(kPi), Vec3::Zero()), truth);
  const AmbiguousPosePair pair{turned, turned, 0.0, 0.0};
  try {
    select(pair, truth, sc.rig, sc.marker, obs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BothInvalid);
  }
}

TEST(Disambiguation, PriorConsistencyNoiseFree) {
  Scene sc;
  Rng rng(14);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 200; ++i) {
    const PlanarState s = view_state(sc.marker, 1.0 + 2.0 * (u(rng) + 1) / 2, 0.7 * u(rng));
    const MarkerObservation obs = observe(sc.rig, from_planar(s), sc.marker);
    if (obs.empty()) continue;
    const AmbiguousPosePair pair = candidates_vehicle_world(sc.rig, sc.marker, obs);
    const auto nearer = nearer_candidate(pair, s);
    if (!nearer) continue;
    EXPECT_EQ(select(pair, from_planar(s), sc.rig, sc.marker, obs).chosen, *nearer);
  }
}

TEST(Disambiguation, BenchNoiseFreeIsPerfect) {
  BenchConfig cfg;
  cfg.pixel_sigma = 0.0;
  cfg.prior_pos_sigma = 0.0;
  cfg.prior_yaw_sigma = 0.0;
  cfg.trials = 200;
  const BenchSummary s = run_disambiguation_bench(cfg);
  EXPECT_EQ(s.accuracy_ours, 1.0);
  EXPECT_EQ(s.accuracy_method_a, 1.0);
}

TEST(Disambiguation, NoisyPriorCanOverrideExactPixels) {
  BenchConfig cfg;
  cfg.pixel_sigma = 0.0;
  cfg.trials = 200;
  const BenchSummary s = run_disambiguation_bench(cfg);
  EXPECT_EQ(s.accuracy_method_a, 1.0);
  EXPECT_LT(s.accuracy_ours, 1.0);
  cfg.w2 = 1.0;
  EXPECT_EQ(run_disambiguation_bench(cfg).accuracy_ours, 1.0);
}

TEST(Disambiguation, BenchPriorBeatsReprojectionOnly) {
  BenchConfig cfg;  // sigma 1 px, 2.5 m, tilt <= 15 deg, prior (5 cm, 3 deg), 1000 trials
  const BenchSummary s = run_disambiguation_bench(cfg);
  ASSERT_EQ(s.rows.size(), 1000u);
  EXPECT_GT(s.accuracy_ours, s.accuracy_method_a);
  // Regression values from the first verified run.
  EXPECT_NEAR(s.accuracy_ours, 0.748, 0.01);
  EXPECT_NEAR(s.accuracy_method_a, 0.551, 0.01);
  EXPECT_NEAR(s.nearer_higher_e1_fraction, 0.449, 0.01);
}
