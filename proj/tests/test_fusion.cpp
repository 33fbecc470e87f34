#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "marker_nav/fusion.hpp"
#include "oracles.hpp"

using namespace marker_nav;

namespace {

NoiseConfig zero_noise() {
  NoiseConfig n;
  n.Q.setZero();
  n.R.setZero();
  return n;
}

double min_eigenvalue(const Mat6& p) {
  return Eigen::SelfAdjointEigenSolver<Mat6>(p).eigenvalues().minCoeff();
}

}  // namespace

TEST(Fusion, PredictExamples) {
  FilterState z;
  z.P.setZero();
  const FilterState a = predict(z, 0.1, zero_noise());
  EXPECT_TRUE(a.x_hat.isZero());
  EXPECT_TRUE(a.P.isZero());

  FilterState s;
  s.x_hat << 1, 2, 0.1, 0.5, 0, 0;
  const FilterState b = predict(s, 0.1, zero_noise());
  Vec6 expected;
  expected << 1.05, 2, 0.1, 0.5, 0, 0;
  EXPECT_LE((b.x_hat - expected).norm(), 1e-15);
}

TEST(Fusion, PredictCovarianceClosedForm) {
  FilterState s;
  s.P.setIdentity();
  const FilterState out = predict(s, 0.1, zero_noise());
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(out.P(i, i), 1.01, 1e-15);
    EXPECT_NEAR(out.P(i, i + 3), 0.1, 1e-15);
    EXPECT_NEAR(out.P(i + 3, i), 0.1, 1e-15);
    EXPECT_NEAR(out.P(i + 3, i + 3), 1.0, 1e-15);
  }
}

TEST(Fusion, UpdateExamples) {
  FilterState s;
  s.x_hat << 0.3, -0.2, 0.1, 0.0, 0.5, 0.0;
  Observation z;
  z.z << 1, 2, 0.5, 1, 1, 1;

  NoiseConfig huge;
  huge.R = 1e12 * Mat6::Identity();
  EXPECT_LE((update(s, z, huge).x_hat - s.x_hat).cwiseAbs().maxCoeff(), 1e-9);

  NoiseConfig exact;
  exact.R.setZero();
  EXPECT_LE((update(s, z, exact).x_hat - z.z).cwiseAbs().maxCoeff(), 1e-15);

  FilterState zero;
  NoiseConfig unit;
  unit.R.setIdentity();
  Observation e1;
  e1.z << 1, 0, 0, 0, 0, 0;
  const FilterState half = update(zero, e1, unit);
  EXPECT_NEAR(half.x_hat(0), 0.5, 1e-15);
  EXPECT_LE(half.x_hat.tail<5>().norm(), 1e-15);
  EXPECT_LE((half.P - 0.5 * Mat6::Identity()).norm(), 1e-15);
}

TEST(Fusion, MaskedPoseRowsLeavePoseToPrediction) {
  FilterState s;
  s.x_hat << 1, 1, 0.2, 0.1, 0.1, 0.0;
  Observation z;
  z.z << 5, 5, 2.0, 0.2, 0.3, 0.1;
  z.pose_part_valid = false;
  const FilterState out = update(s, z, NoiseConfig{});
  EXPECT_LE((out.x_hat.head<3>() - s.x_hat.head<3>()).norm(), 1e-9);
  EXPECT_GT((out.x_hat.tail<3>() - s.x_hat.tail<3>()).norm(), 0.01);
}

TEST(Fusion, SingularInnovation) {
  FilterState s;
  s.P.setZero();
  try {
    update(s, Observation{}, zero_noise());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularInnovation);
  }
}

TEST(Fusion, InnovationIsWrapped) {
  FilterState s;
  s.x_hat(2) = 3.1;
  Observation z;
  z.z(2) = -3.1;
  NoiseConfig unit;
  unit.R.setIdentity();
  const FilterState out = update(s, z, unit);
  // Half of the short way round (2 pi - 6.2), not half of -6.2.
  EXPECT_LE(std::abs(wrap_angle(out.x_hat(2) - 3.1)), (2 * kPi - 6.2) / 2 + 1e-12);
}

TEST(Fusion, AssembleObservation) {
  const BicycleParams p;
  const Observation a = assemble_observation(from_planar({1, 2, 0.3}), {0.0, 0.2}, 0.3, p);
  EXPECT_NEAR(a.z(0), 1, 1e-12);
  EXPECT_NEAR(a.z(1), 2, 1e-12);
  EXPECT_NEAR(a.z(2), 0.3, 1e-12);
  EXPECT_EQ(a.z.tail<3>().norm(), 0.0);

  const Observation b = assemble_observation(RigidTransform::identity(), {1.0, 0.5}, 0.0, p);
  EXPECT_NEAR(b.z(3), std::cos(oracle::kSideslipHalfRad), 1e-9);
  EXPECT_NEAR(b.z(4), std::sin(oracle::kSideslipHalfRad), 1e-9);
  EXPECT_NEAR(b.z(5), yaw_rate(1.0, 0.5, p), 1e-12);
}

TEST(Fusion, CovarianceStaysSymmetricPsd) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0, 1);
  std::bernoulli_distribution visible(0.7);
  FilterState s = initial_state({0, 0, 0}, Vec6(0.25, 0.25, 0.25, 1, 1, 1));
  const NoiseConfig noise;
  for (int i = 0; i < 10000; ++i) {
    s = predict(s, 1.0 / 11.0, noise);
    Observation z;
    for (int k = 0; k < 6; ++k) z.z(k) = s.x_hat(k) + 0.1 * n(rng);
    z.z(2) = wrap_angle(z.z(2));
    z.pose_part_valid = visible(rng);
    s = update(s, z, noise);
    ASSERT_LE((s.P - s.P.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    ASSERT_GE(min_eigenvalue(s.P), -1e-10);
  }
}

TEST(Fusion, ConvergesWithExactMeasurements) {
  NoiseConfig eps;
  eps.Q = 1e-9 * Mat6::Identity();
  eps.R = 1e-9 * Mat6::Identity();
  const double dt = 0.1;
  Vec6 truth;
  truth << 0, 0, 0.2, 0.3, 0.1, 0.05;
  FilterState s = initial_state({0.5, 0.0, 0.5}, Vec6(0.25, 0.25, 0.25, 1, 1, 1));
  for (int k = 0; k < 50; ++k) {
    truth.head<3>() += dt * truth.tail<3>();
    s = predict(s, dt, eps);
    Observation z;
    z.z = truth;
    s = update(s, z, eps);
  }
  EXPECT_LT((s.x_hat - truth).norm(), 1e-3);
}
