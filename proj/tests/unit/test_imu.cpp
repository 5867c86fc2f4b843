#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "vio/imu/preintegration.hpp"
#include "vio/simulator/simulator.hpp"

using namespace vio;
using vio::test::random_pose;
using vio::test::random_vector;
using vio::test::relative_error;

namespace {

std::vector<ImuSample> constant_stream(double duration, double rate, const Eigen::Vector3d& omega,
                                       const Eigen::Vector3d& accel) {
  std::vector<ImuSample> out;
  const int n = static_cast<int>(std::lround(duration * rate));
  for (int k = 0; k <= n; ++k) out.push_back({k / rate, omega, accel});
  return out;
}

std::vector<ImuSample> random_stream(std::mt19937_64& rng, int count, double rate) {
  std::vector<ImuSample> out;
  Eigen::Vector3d w = random_vector(rng, 0.5), a = random_vector(rng, 2.0) + Eigen::Vector3d(0, 0, 9.81);
  for (int k = 0; k < count; ++k) {
    w += random_vector(rng, 0.05);
    a += random_vector(rng, 0.2);
    out.push_back({k / rate, w, a});
  }
  return out;
}

NavState random_state(std::mt19937_64& rng) {
  NavState s;
  s.T_wb = random_pose(rng, 1.0, 2.0);
  s.v_w = random_vector(rng, 1.0);
  s.bias.accel = random_vector(rng, 0.05);
  s.bias.gyro = random_vector(rng, 0.01);
  return s;
}

// Applies a 15-dim perturbation [rho, phi, v, b_a, b_g] in the solver's convention.
NavState perturb(const NavState& s, const Eigen::Matrix<double, 15, 1>& d) {
  NavState out = s;
  out.T_wb = s.T_wb.retract(d.head<6>());
  out.v_w += d.segment<3>(6);
  out.bias.accel += d.segment<3>(9);
  out.bias.gyro += d.segment<3>(12);
  return out;
}

}  // namespace

TEST(Preintegration, NullMotion) {
  const auto samples = constant_stream(3.0, 200, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero());
  const PreintegratedImu pre = preintegrate(samples, ImuBias{}, ImuNoiseParams{});
  EXPECT_TRUE(pre.alpha.isZero(0.0));
  EXPECT_TRUE(pre.beta.isZero(0.0));
  EXPECT_TRUE(pre.gamma.matrix().isIdentity(1e-15));
}

TEST(Preintegration, ConstantAcceleration) {
  const auto samples = constant_stream(2.0, 100, Eigen::Vector3d::Zero(), Eigen::Vector3d(1, 0, 0));
  const PreintegratedImu pre = preintegrate(samples, ImuBias{}, ImuNoiseParams{});
  EXPECT_LT((pre.beta - Eigen::Vector3d(2, 0, 0)).norm(), 1e-6);
  EXPECT_LT((pre.alpha - Eigen::Vector3d(2, 0, 0)).norm(), 1e-3);
  EXPECT_NEAR(pre.dt_total, 2.0, 1e-9);
}

TEST(Preintegration, ConstantRotationRate) {
  const auto samples = constant_stream(2.0, 200, Eigen::Vector3d(0, 0, 0.5), Eigen::Vector3d::Zero());
  const PreintegratedImu pre = preintegrate(samples, ImuBias{}, ImuNoiseParams{});
  const Eigen::Matrix3d expected = Eigen::AngleAxisd(1.0, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  EXPECT_LT((pre.gamma.matrix() - expected).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Preintegration, BiasIsSubtracted) {
  ImuBias bias;
  bias.accel = Eigen::Vector3d(0.1, -0.2, 0.3);
  bias.gyro = Eigen::Vector3d(0.01, 0.02, -0.03);
  const auto samples = constant_stream(1.0, 200, bias.gyro, bias.accel);
  const PreintegratedImu pre = preintegrate(samples, bias, ImuNoiseParams{});
  EXPECT_LT(pre.beta.norm(), 1e-12);
  EXPECT_LT(pre.gamma.log().norm(), 1e-12);
}

TEST(Preintegration, RejectsShortAndUnorderedStreams) {
  std::vector<ImuSample> one(1);
  try {
    preintegrate(one, ImuBias{}, ImuNoiseParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyStream);
  }
  std::vector<ImuSample> backwards(3);
  backwards[0].t = 0.1;
  backwards[1].t = 0.2;
  backwards[2].t = 0.2;
  try {
    preintegrate(backwards, ImuBias{}, ImuNoiseParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonMonotonicTime);
  }
}

TEST(Preintegration, DtTotalIsSumOfIntervals) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> step(0.001, 0.01);
  std::vector<ImuSample> samples;
  double t = 0.3, sum = 0;
  for (int k = 0; k < 300; ++k) {
    samples.push_back({t, random_vector(rng, 0.3), random_vector(rng, 1.0)});
    const double dt = step(rng);
    t += dt;
    if (k < 299) sum += dt;
  }
  EXPECT_NEAR(preintegrate(samples, ImuBias{}, ImuNoiseParams{}).dt_total, sum, 1e-9);
}

TEST(Preintegration, CovarianceIsPsdAndGrows) {
  std::mt19937_64 rng(3);
  const auto samples = random_stream(rng, 120, 200);
  double previous = 0;
  for (std::size_t n = 2; n <= samples.size(); n += 7) {
    const PreintegratedImu pre =
        preintegrate(std::span<const ImuSample>(samples.data(), n), ImuBias{}, ImuNoiseParams{});
    EXPECT_LT((pre.covariance - pre.covariance.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    Eigen::SelfAdjointEigenSolver<Matrix9d> eig(pre.covariance);
    EXPECT_GT(eig.eigenvalues().minCoeff(), -1e-12);
    EXPECT_GE(pre.covariance.trace(), previous);
    previous = pre.covariance.trace();
  }
}

TEST(Preintegration, BiasJacobiansMatchReintegration) {
  std::mt19937_64 rng(5);
  const auto samples = random_stream(rng, 60, 200);
  ImuBias bias;
  bias.accel = Eigen::Vector3d(0.05, -0.02, 0.01);
  bias.gyro = Eigen::Vector3d(0.003, 0.001, -0.002);
  const PreintegratedImu pre = preintegrate(samples, bias, ImuNoiseParams{});
  const double h = 1e-6;
  for (int k = 0; k < 6; ++k) {
    ImuBias plus = bias, minus = bias;
    if (k < 3) {
      plus.accel(k) += h;
      minus.accel(k) -= h;
    } else {
      plus.gyro(k - 3) += h;
      minus.gyro(k - 3) -= h;
    }
    const PreintegratedImu p = preintegrate(samples, plus, ImuNoiseParams{});
    const PreintegratedImu m = preintegrate(samples, minus, ImuNoiseParams{});
    const Eigen::Vector3d da = (p.alpha - m.alpha) / (2 * h);
    const Eigen::Vector3d db = (p.beta - m.beta) / (2 * h);
    const Eigen::Vector3d dg = (pre.gamma.inverse() * p.gamma).log() / (2 * h) -
                               (pre.gamma.inverse() * m.gamma).log() / (2 * h);
    if (k < 3) {
      EXPECT_LT(relative_error(pre.d_alpha_d_ba.col(k), da), 1e-6);
      EXPECT_LT(relative_error(pre.d_beta_d_ba.col(k), db), 1e-6);
    } else {
      EXPECT_LT(relative_error(pre.d_alpha_d_bg.col(k - 3), da), 1e-6);
      EXPECT_LT(relative_error(pre.d_beta_d_bg.col(k - 3), db), 1e-6);
      EXPECT_LT(relative_error(pre.d_gamma_d_bg.col(k - 3), dg), 1e-6);
    }
  }
}

TEST(Preintegration, BiasSensitivityIsContinuous) {
  std::mt19937_64 rng(7);
  const auto samples = random_stream(rng, 80, 200);
  const PreintegratedImu base = preintegrate(samples, ImuBias{}, ImuNoiseParams{});
  double previous = 1e300;
  for (double delta : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    ImuBias b;
    b.accel = Eigen::Vector3d::Constant(delta);
    b.gyro = Eigen::Vector3d::Constant(delta * 0.1);
    const double change = (preintegrate(samples, b, ImuNoiseParams{}).alpha - base.alpha).norm();
    EXPECT_LT(change, previous);
    previous = change;
  }
  EXPECT_LT(previous, 1e-5);
}

TEST(ImuResidual, ZeroOnPredictedState) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto samples = random_stream(rng, 40, 200);
    const NavState si = random_state(rng);
    const PreintegratedImu pre = preintegrate(samples, si.bias, ImuNoiseParams{});
    const NavState sj = predict_state(si, pre, GravityModel{});
    EXPECT_LT(imu_residual(si, sj, pre, GravityModel{}).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(ImuResidual, DegenerateIntervalIsNearZero) {
  std::vector<ImuSample> samples(2);
  samples[1].t = 1e-9;
  const PreintegratedImu pre = preintegrate(samples, ImuBias{}, ImuNoiseParams{});
  GravityModel zero_g;
  zero_g.g_world.setZero();
  NavState s;
  EXPECT_LT(imu_residual(s, s, pre, zero_g).norm(), 1e-6);
}

TEST(ImuResidual, LinearInPositionOfJ) {
  std::mt19937_64 rng(13);
  const auto samples = random_stream(rng, 40, 200);
  NavState si = random_state(rng);
  si.T_wb = SE3d(SO3d(), si.T_wb.translation());
  const PreintegratedImu pre = preintegrate(samples, si.bias, ImuNoiseParams{});
  NavState sj = predict_state(si, pre, GravityModel{});
  const Vector9d r0 = imu_residual(si, sj, pre, GravityModel{});
  sj.T_wb.translation() += Eigen::Vector3d(0.1, 0, 0);
  const Vector9d r1 = imu_residual(si, sj, pre, GravityModel{});
  EXPECT_LT(((r1 - r0).head<3>() - Eigen::Vector3d(0.1, 0, 0)).norm(), 1e-12);
  EXPECT_LT((r1 - r0).tail<6>().norm(), 1e-12);
}

TEST(ImuResidual, JacobiansMatchFiniteDifferences) {
  std::mt19937_64 rng(17);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const auto samples = random_stream(rng, 30, 200);
    const NavState si = random_state(rng);
    const PreintegratedImu pre = preintegrate(samples, si.bias, ImuNoiseParams{});
    NavState sj = predict_state(si, pre, GravityModel{});
    sj = perturb(sj, (Eigen::Matrix<double, 15, 1>() << random_vector(rng, 0.05), random_vector(rng, 0.05),
                      random_vector(rng, 0.05), random_vector(rng, 0.01), random_vector(rng, 0.001))
                         .finished());
    // Move the linearization point away from bias_ref so the correction terms are exercised.
    NavState si_eval = si;
    si_eval.bias.accel += random_vector(rng, 0.01);
    si_eval.bias.gyro += random_vector(rng, 0.002);

    const auto J = imu_residual_jacobians(si_eval, sj, pre, GravityModel{});
    Matrix9x15d Ji, Jj;
    for (int k = 0; k < 15; ++k) {
      const Eigen::Matrix<double, 15, 1> d = Eigen::Matrix<double, 15, 1>::Unit(k) * h;
      Ji.col(k) = (imu_residual(perturb(si_eval, d), sj, pre, GravityModel{}) -
                   imu_residual(perturb(si_eval, -d), sj, pre, GravityModel{})) /
                  (2 * h);
      Jj.col(k) = (imu_residual(si_eval, perturb(sj, d), pre, GravityModel{}) -
                   imu_residual(si_eval, perturb(sj, -d), pre, GravityModel{})) /
                  (2 * h);
    }
    EXPECT_LT(relative_error(J.d_state_i, Ji), 1e-5) << "config " << i;
    EXPECT_LT(relative_error(J.d_state_j, Jj), 1e-5) << "config " << i;
  }
}

TEST(ImuResidual, ClosedFormBlocks) {
  std::mt19937_64 rng(19);
  const auto samples = random_stream(rng, 30, 200);
  const NavState si = random_state(rng);
  const PreintegratedImu pre = preintegrate(samples, si.bias, ImuNoiseParams{});
  const NavState sj = predict_state(si, pre, GravityModel{});
  const auto J = imu_residual_jacobians(si, sj, pre, GravityModel{});
  const Eigen::Matrix3d Rit = si.T_wb.rotation().matrix().transpose();
  EXPECT_EQ((J.d_state_j.block<3, 3>(3, 6) - Rit).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((J.d_state_j.block<3, 3>(0, 6)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ImuResidual, GroundTruthConsistencyOnSimulatedCircle) {
  const Simulation sim = generate(vio::test::small_scenario(4.0, true));
  const auto& imu = sim.dataset.imu;
  const auto& gt = sim.truth.imu_rate;
  ASSERT_EQ(imu.size(), gt.size());
  const int step = 40;  // 0.2 s segments, one keyframe interval
  double worst = 0;
  for (std::size_t k = 0; k + step < imu.size(); k += step) {
    const PreintegratedImu pre =
        preintegrate(std::span<const ImuSample>(imu.data() + k, step + 1), ImuBias{}, ImuNoiseParams{});
    NavState si, sj;
    si.T_wb = gt[k].T_wb;
    si.v_w = gt[k].v_w;
    sj.T_wb = gt[k + step].T_wb;
    sj.v_w = gt[k + step].v_w;
    worst = std::max(worst, imu_residual(si, sj, pre, sim.dataset.calib.gravity).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(ImuResidual, BiasWalkInformationScalesWithTime) {
  const ImuNoiseParams noise;
  const auto a = bias_walk_information(noise, 0.1);
  const auto b = bias_walk_information(noise, 0.2);
  EXPECT_NEAR(a(0, 0), 2 * b(0, 0), 1e-9 * a(0, 0));
  EXPECT_NEAR(a(0, 0), 1.0 / (noise.accel_walk * noise.accel_walk * 0.1), 1e-6);
  EXPECT_NEAR(a(5, 5), 1.0 / (noise.gyro_walk * noise.gyro_walk * 0.1), 1e-3);
}
