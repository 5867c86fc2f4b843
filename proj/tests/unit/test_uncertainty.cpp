#include <gtest/gtest.h>

#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "vio/common/error.hpp"
#include "vio/uncertainty/uncertainty.hpp"

using namespace vio;
using vio::test::euroc_camera;
using vio::test::random_pose;
using vio::test::random_vector;

namespace {

Eigen::Matrix3d random_spd(std::mt19937_64& rng, double scale) {
  Eigen::Matrix3d A;
  for (int c = 0; c < 3; ++c) A.col(c) = random_vector(rng, scale);
  return A * A.transpose() + Eigen::Matrix3d::Identity() * scale * scale * 0.1;
}

// Camera pose looking at a point `depth` in front of it, in world coordinates.
LearningObservation observe(const PinholeCamerad& cam, const SE3d& T_wb, const Eigen::Vector3d& p) {
  const Eigen::Vector3d pc = camera_from_world(cam, T_wb) * p;
  return {T_wb, pc.head<2>() / pc.z()};
}

double min_eigenvalue(const Eigen::Matrix3d& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(m).eigenvalues().minCoeff();
}

}  // namespace

TEST(PropagateToPixel, OnAxisIsotropic) {
  PinholeCamerad cam = euroc_camera();
  cam.fy = cam.fx;
  const double sigma = 0.02, Z = 3.0;
  const Eigen::Matrix2d S = propagate_to_pixel(cam, SE3d(), Eigen::Vector3d(0, 0, Z), sigma * sigma * Eigen::Matrix3d::Identity());
  const double expected = std::pow(cam.fx * sigma / Z, 2);
  EXPECT_NEAR(S(0, 0), expected, 1e-9 * expected);
  EXPECT_NEAR(S(1, 1), expected, 1e-9 * expected);
  EXPECT_NEAR(S(0, 1), 0.0, 1e-12);
}

TEST(PropagateToPixel, ZeroCovarianceAndLinearity) {
  std::mt19937_64 rng(1);
  const PinholeCamerad cam = euroc_camera();
  const Eigen::Vector3d p(0.3, -0.2, 4.0);
  EXPECT_TRUE(propagate_to_pixel(cam, SE3d(), p, Eigen::Matrix3d::Zero()).isZero(0.0));
  const Eigen::Matrix3d S = random_spd(rng, 0.05);
  const Eigen::Matrix2d base = propagate_to_pixel(cam, SE3d(), p, S);
  for (double c : {0.0, 0.5, 3.0}) {
    EXPECT_LT((propagate_to_pixel(cam, SE3d(), p, c * S) - c * base).cwiseAbs().maxCoeff(), 1e-9 * base.norm());
  }
}

TEST(PropagateToPixel, BehindCameraThrows) {
  try {
    propagate_to_pixel(euroc_camera(), SE3d(), Eigen::Vector3d(0, 0, -1), Eigen::Matrix3d::Identity());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BehindCamera);
  }
}

TEST(PropagateToPixel, AgreesWithMonteCarlo) {
  std::mt19937_64 rng(2);
  const PinholeCamerad cam = euroc_camera();
  for (int config = 0; config < 5; ++config) {
    const SE3d T_cw = random_pose(rng, 0.3, 0.5);
    std::uniform_real_distribution<double> u(-0.5, 0.5), d(1.0, 6.0);
    const double depth = d(rng);
    const Eigen::Vector3d p_cam(u(rng) * depth, u(rng) * depth * 0.6, depth);
    const Eigen::Vector3d p_world = T_cw.inverse() * p_cam;
    Eigen::Matrix3d S = random_spd(rng, 1.0);
    S *= std::pow(0.01 * depth, 2) / Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(S).eigenvalues().maxCoeff();

    const Eigen::Matrix2d analytic = propagate_to_pixel(cam, T_cw, p_world, S);
    const Eigen::Matrix3d L = S.llt().matrixL();
    std::normal_distribution<double> n(0, 1);
    const int N = 100000;
    std::vector<Eigen::Vector2d> uv(N);
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (auto& z : uv) {
      z = project(cam, T_cw * (p_world + L * Eigen::Vector3d(n(rng), n(rng), n(rng))));
      mean += z;
    }
    mean /= N;
    Eigen::Matrix2d mc = Eigen::Matrix2d::Zero();
    for (const auto& z : uv) mc += (z - mean) * (z - mean).transpose();
    mc /= N - 1;
    EXPECT_LT((analytic - mc).norm() / mc.norm(), 0.10) << "config " << config;
  }
}

TEST(AdaptiveInformation, Examples) {
  EXPECT_TRUE(adaptive_information(Eigen::Matrix2d::Identity(), 0.0).omega.isApprox(Eigen::Matrix2d::Identity()));
  const Eigen::Matrix2d omega = adaptive_information(Eigen::Vector2d(4, 1).asDiagonal().toDenseMatrix(), 0.0).omega;
  EXPECT_NEAR(omega(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(omega(1, 1), 1.0, 1e-15);
  EXPECT_EQ(omega(0, 1), 0.0);

  const Eigen::Matrix2d degenerate = adaptive_information(Eigen::Matrix2d::Zero(), 1e-6).omega;
  EXPECT_TRUE(degenerate.allFinite());
  EXPECT_NEAR(degenerate(0, 0), 1e9 + 1e-6, 1e-3);
  EXPECT_NEAR(degenerate(1, 1), 1e9 + 1e-6, 1e-3);
}

TEST(AdaptiveInformation, SymmetricPdBoundedByLambda) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    Eigen::Matrix2d A;
    A << random_vector(rng, 3.0).head<2>(), random_vector(rng, 3.0).head<2>();
    Eigen::Matrix2d S = A * A.transpose();
    if (i % 10 == 0) S = A.col(0) * A.col(0).transpose();  // rank one
    const Eigen::Matrix2d omega = adaptive_information(S, 1e-6).omega;
    EXPECT_TRUE(omega.allFinite());
    EXPECT_LT(std::abs(omega(0, 1) - omega(1, 0)), 1e-9 * omega.norm());
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(omega).eigenvalues().minCoeff(), 1e-6 * (1 - 1e-9));
  }
}

TEST(ClampCovariance, EigenvaluesWithinBounds) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Matrix3d S = random_spd(rng, std::pow(10.0, (i % 7) - 4));
    const Eigen::Matrix3d C = clamp_covariance(S, 1e-3, 1.0);
    EXPECT_LT((C - C.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(C).eigenvalues();
    EXPECT_GE(ev.minCoeff(), 1e-6 * (1 - 1e-9));
    EXPECT_LE(ev.maxCoeff(), 1.0 * (1 + 1e-9));
  }
}

TEST(EmpiricalCovariance, NoiselessObservationsHaveZeroSpread) {
  std::mt19937_64 rng(5);
  const PinholeCamerad cam = euroc_camera();
  const Eigen::Vector3d p(0.2, 0.1, 4.0);
  std::vector<LearningObservation> obs;
  for (int k = 0; k < 5; ++k) obs.push_back(observe(cam, SE3d(SO3d(), Eigen::Vector3d(0.2 * k, 0, 0)), p));
  int used = 0;
  const Eigen::Matrix3d S = empirical_covariance(cam, p, obs, used);
  EXPECT_EQ(used, 5);
  EXPECT_LT(S.cwiseAbs().maxCoeff(), 1e-20);

  LearningInput in{p, obs, LandmarkUncertainty{}};
  UncertaintyOptions opts;
  const auto learned = learn_from_ba(cam, std::span<const LearningInput>(&in, 1), opts);
  ASSERT_EQ(learned.size(), 1u);
  EXPECT_EQ(learned[0].source, UncertaintySource::Learned);
  EXPECT_LT(learned[0].sigma_world.trace(), in.current.sigma_world.trace());
  EXPECT_GE(min_eigenvalue(learned[0].sigma_world), opts.sigma_floor * opts.sigma_floor * (1 - 1e-9));
}

TEST(EmpiricalCovariance, TwoSymmetricSamples) {
  // Two cameras on the z axis; shifting each measured ray by +-delta at the point's depth
  // puts the back-projections at p +- (delta, 0, 0).
  const PinholeCamerad cam = euroc_camera();
  const Eigen::Vector3d p(0, 0, 4);
  const double delta = 0.03;
  std::vector<LearningObservation> obs;
  const SE3d Ta(SO3d(), Eigen::Vector3d(0, 0, 0)), Tb(SO3d(), Eigen::Vector3d(0, 0, 1));
  obs.push_back({Ta, Eigen::Vector2d(delta / 4.0, 0)});
  obs.push_back({Tb, Eigen::Vector2d(-delta / 3.0, 0)});
  int used = 0;
  const Eigen::Matrix3d S = empirical_covariance(cam, p, obs, used);
  EXPECT_EQ(used, 2);
  Eigen::Matrix3d expected = Eigen::Matrix3d::Zero();
  expected(0, 0) = delta * delta;
  EXPECT_LT((S - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EmpiricalCovariance, SkipsObservationsBehindCamera) {
  const PinholeCamerad cam = euroc_camera();
  const Eigen::Vector3d p(0, 0, 4);
  std::vector<LearningObservation> obs{observe(cam, SE3d(), p), observe(cam, SE3d(SO3d(), Eigen::Vector3d(0.1, 0, 0)), p)};
  obs.push_back({SE3d(SO3d(), Eigen::Vector3d(0, 0, 6)), Eigen::Vector2d::Zero()});
  int used = 0;
  empirical_covariance(cam, p, obs, used);
  EXPECT_EQ(used, 2);
}

TEST(LearnFromBa, TooFewObservationsKeepCurrent) {
  const PinholeCamerad cam = euroc_camera();
  const Eigen::Vector3d p(0, 0, 4);
  LearningInput in{p, {observe(cam, SE3d(), p), observe(cam, SE3d(SO3d(), Eigen::Vector3d(0.1, 0, 0)), p)}, {}};
  in.current.sigma_world = Eigen::Vector3d(1e-2, 2e-2, 3e-2).asDiagonal();
  in.current.source = UncertaintySource::Geometric;
  const auto out = learn_from_ba(cam, std::span<const LearningInput>(&in, 1), UncertaintyOptions{});
  EXPECT_EQ(out[0].source, UncertaintySource::Geometric);
  EXPECT_EQ(out[0].sigma_world, in.current.sigma_world);
}

TEST(LearnFromBa, NoisierObservationsGiveLargerCovariance) {
  std::mt19937_64 rng(6);
  const PinholeCamerad cam = euroc_camera();
  std::normal_distribution<double> n(0, 1);
  double clean = 0, noisy = 0;
  for (int j = 0; j < 40; ++j) {
    const Eigen::Vector3d p(0.5 * n(rng), 0.3 * n(rng), 4.0 + n(rng) * 0.5);
    for (double sigma_px : {0.5, 2.0}) {
      LearningInput in{p, {}, {}};
      in.current.sigma_world = Eigen::Matrix3d::Identity() * 1e-6;
      for (int k = 0; k < 8; ++k) {
        LearningObservation o = observe(cam, SE3d(SO3d::exp(random_vector(rng, 0.02)), Eigen::Vector3d(0.1 * k, 0, 0)), p);
        o.p_norm += Eigen::Vector2d(n(rng) * sigma_px / cam.fx, n(rng) * sigma_px / cam.fy);
        in.observations.push_back(o);
      }
      const double tr = learn_from_ba(cam, std::span<const LearningInput>(&in, 1), UncertaintyOptions{})[0].sigma_world.trace();
      (sigma_px > 1 ? noisy : clean) += tr;
    }
  }
  EXPECT_GT(noisy, 4 * clean);
}

TEST(BlendUncertainty, WeightAndContraction) {
  std::mt19937_64 rng(7);
  UncertaintyOptions opts;
  for (int i = 0; i < 50; ++i) {
    LandmarkUncertainty old;
    old.sigma_world = random_spd(rng, 0.05);
    const Eigen::Matrix3d emp = random_spd(rng, 0.05);
    const int n = 1 + i % 12;
    const double w = n / (n + opts.blend_n0);
    const LandmarkUncertainty out = blend_uncertainty(old, emp, n, opts);
    EXPECT_LT((out.sigma_world - ((1 - w) * old.sigma_world + w * emp)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((out.sigma_world - emp).norm(), (1 - w) * (old.sigma_world - emp).norm() + 1e-12);
    EXPECT_EQ(out.source, UncertaintySource::Learned);
  }
}

TEST(GeometricPrior, DepthAxisDominates) {
  const PinholeCamerad cam = euroc_camera();
  const SE3d Ta(SO3d(), Eigen::Vector3d(-0.1, 0, 0)), Tb(SO3d(), Eigen::Vector3d(0.1, 0, 0));
  const LandmarkUncertainty u = geometric_prior(cam, Ta, Tb, Eigen::Vector3d(0, 0, 3), UncertaintyOptions{});
  EXPECT_EQ(u.source, UncertaintySource::Geometric);
  EXPECT_GT(u.sigma_world(2, 2), u.sigma_world(0, 0));
  EXPECT_GT(u.sigma_world(2, 2), u.sigma_world(1, 1));
}

TEST(GeometricPrior, AgreesWithMonteCarloTriangulation) {
  const PinholeCamerad cam = euroc_camera();
  const SE3d Ta(SO3d(), Eigen::Vector3d(-0.1, 0, 0)), Tb(SO3d(), Eigen::Vector3d(0.1, 0, 0));
  const Eigen::Vector3d p(0.1, 0.05, 2.0);
  UncertaintyOptions opts;
  opts.pixel_sigma0 = 0.5;
  const Eigen::Matrix3d analytic = geometric_prior(cam, Ta, Tb, p, opts).sigma_world;

  // Gauss-Newton triangulation from noisy pixel pairs.
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, opts.pixel_sigma0);
  const Eigen::Vector2d za = project(cam, camera_from_world(cam, Ta) * p);
  const Eigen::Vector2d zb = project(cam, camera_from_world(cam, Tb) * p);
  const int N = 20000;
  Eigen::Matrix3d mc = Eigen::Matrix3d::Zero();
  for (int s = 0; s < N; ++s) {
    const Eigen::Vector2d na(n(rng), n(rng)), nb(n(rng), n(rng));
    Eigen::Vector3d x = p;
    for (int it = 0; it < 5; ++it) {
      const auto ra = reprojection_residual_and_jacobians(cam, Ta, x, Eigen::Vector2d(za + na));
      const auto rb = reprojection_residual_and_jacobians(cam, Tb, x, Eigen::Vector2d(zb + nb));
      Eigen::Matrix<double, 4, 3> A;
      A << ra.J_point, rb.J_point;
      Eigen::Vector4d r;
      r << ra.residual, rb.residual;
      x -= (A.transpose() * A).ldlt().solve(A.transpose() * r);
    }
    mc += (x - p) * (x - p).transpose();
  }
  mc /= N;
  EXPECT_LT(std::abs(analytic(2, 2) - mc(2, 2)) / mc(2, 2), 0.1);
  EXPECT_LT(std::abs(analytic(0, 0) - mc(0, 0)) / mc(0, 0), 0.1);
}

TEST(GeometricPrior, DepthScaling) {
  const PinholeCamerad cam = euroc_camera();
  const SE3d Ta(SO3d(), Eigen::Vector3d(-0.1, 0, 0)), Tb(SO3d(), Eigen::Vector3d(0.1, 0, 0));
  UncertaintyOptions opts;
  opts.sigma_cap = 100.0;
  const double near = geometric_prior(cam, Ta, Tb, Eigen::Vector3d(0, 0, 2), opts).sigma_world(2, 2);
  const double far = geometric_prior(cam, Ta, Tb, Eigen::Vector3d(0, 0, 4), opts).sigma_world(2, 2);
  EXPECT_GE(far / near, 14.0);
  EXPECT_LE(far / near, 18.0);
}

TEST(GeometricPrior, ZeroBaselineThrows) {
  try {
    geometric_prior(euroc_camera(), SE3d(), SE3d(), Eigen::Vector3d(0, 0, 3), UncertaintyOptions{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateBaseline);
  }
}

TEST(RefineIteratively, FixedPointStopsAfterOneRound) {
  int forward = 0, optimize = 0, backward = 0;
  RefinementHooks hooks;
  hooks.forward = [&] { ++forward; };
  hooks.optimize = [&] {
    ++optimize;
    return SolveReport{};
  };
  hooks.backward = [&] {
    ++backward;
    return 0.0;
  };
  const RefinementResult r = refine_iteratively(hooks, 2, 0.05);
  EXPECT_EQ(r.outer_iterations, 1);
  EXPECT_LT(r.last_change, 0.05);
  EXPECT_EQ(forward, 1);
  EXPECT_EQ(optimize, 1);
  EXPECT_EQ(backward, 1);
}

TEST(RefineIteratively, RunsUntilOuterLimit) {
  int rounds = 0;
  RefinementHooks hooks;
  hooks.forward = [] {};
  hooks.optimize = [] { return SolveReport{}; };
  hooks.backward = [&] {
    ++rounds;
    return 0.5;
  };
  const RefinementResult r = refine_iteratively(hooks, 3, 0.05);
  EXPECT_EQ(r.outer_iterations, 3);
  EXPECT_EQ(rounds, 3);
  EXPECT_EQ(r.solves.size(), 3u);
}
