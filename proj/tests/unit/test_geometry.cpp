#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "vio/geometry/camera.hpp"
#include "vio/geometry/se3.hpp"

using namespace vio;
using vio::test::random_pose;
using vio::test::random_vector;
using vio::test::relative_error;

namespace {

// Matrix exponential by truncated power series, independent of the closed form.
Eigen::Matrix3d series_exp(const Eigen::Matrix3d& K, int terms = 30) {
  Eigen::Matrix3d out = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d term = Eigen::Matrix3d::Identity();
  for (int k = 1; k < terms; ++k) {
    term = term * K / k;
    out += term;
  }
  return out;
}

double orthonormality_error(const Eigen::Matrix3d& R) {
  return (R * R.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(So3, ExpOfZeroIsIdentity) {
  EXPECT_TRUE(SO3d::exp(Eigen::Vector3d::Zero()).matrix().isIdentity(0.0));
}

TEST(So3, QuarterTurnAboutXMatchesSeries) {
  const Eigen::Vector3d phi(M_PI / 2, 0, 0);
  const SO3d R = SO3d::exp(phi);
  EXPECT_LT((R.matrix() - series_exp(hat(phi))).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((R * Eigen::Vector3d(0, 1, 0) - Eigen::Vector3d(0, 0, 1)).norm(), 1e-12);
}

TEST(So3, TinyAngleIsIdentity) {
  const SO3d R = SO3d::exp(Eigen::Vector3d(1e-12, 0, 0));
  EXPECT_LT((R.matrix() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(So3, ExpMatchesSeriesOnRandomVectors) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d phi = random_vector(rng, 1.0);
    EXPECT_LT((SO3d::exp(phi).matrix() - series_exp(hat(phi), 40)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(So3, LogOfIdentityIsZero) {
  EXPECT_TRUE(SO3d().log().isZero(0.0));
}

TEST(So3, LogRoundTrip) {
  const Eigen::Vector3d phi(0.3, -0.2, 0.1);
  EXPECT_LT((SO3d::exp(phi).log() - phi).norm(), 1e-10);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> angle(0.0, M_PI - 1e-5);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d axis = random_vector(rng, 1.0).normalized();
    const Eigen::Vector3d v = angle(rng) * axis;
    EXPECT_LT((SO3d::exp(v).log() - v).cwiseAbs().maxCoeff(), 1e-9) << v.transpose();
  }
}

TEST(So3, LogNearPiFromAxisAngle) {
  const double theta = M_PI - 1e-3;
  const SO3d R(Eigen::AngleAxisd(theta, Eigen::Vector3d::UnitZ()).toRotationMatrix());
  const Eigen::Vector3d v = R.log();
  EXPECT_NEAR(v.norm(), theta, 1e-6);
  EXPECT_NEAR(v.z(), theta, 1e-6);
}

TEST(So3, LogRejectsCutLocus) {
  const SO3d R(Eigen::AngleAxisd(M_PI, Eigen::Vector3d::UnitX()).toRotationMatrix());
  try {
    R.log();
    FAIL() << "expected AngleNearPi";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AngleNearPi);
  }
}

TEST(So3, OrthonormalAfterLongChains) {
  std::mt19937_64 rng(5);
  SO3d R;
  for (int i = 0; i < 10000; ++i) {
    R = R * SO3d::exp(random_vector(rng, 0.3));
    if (i % 1000 == 999) R.renormalize();
  }
  EXPECT_LT(orthonormality_error(R.matrix()), 1e-9);
  EXPECT_NEAR(R.matrix().determinant(), 1.0, 1e-9);
}

TEST(So3, RightJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d phi = random_vector(rng, 0.8);
    const SO3d R = SO3d::exp(phi);
    Eigen::Matrix3d numeric;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d d = Eigen::Vector3d::Unit(k) * h;
      const Eigen::Vector3d plus = (R.inverse() * SO3d::exp(phi + d)).log();
      const Eigen::Vector3d minus = (R.inverse() * SO3d::exp(phi - d)).log();
      numeric.col(k) = (plus - minus) / (2 * h);
    }
    EXPECT_LT(relative_error(so3_right_jacobian<double>(phi), numeric), 1e-5);
    EXPECT_LT((so3_right_jacobian<double>(phi) * so3_right_jacobian_inverse<double>(phi) -
               Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Se3, ExpOfZeroIsIdentity) {
  const SE3d T = se3_exp<double>(Vector6d::Zero());
  EXPECT_TRUE(T.matrix().isIdentity(0.0));
}

TEST(Se3, IdentityActsTrivially) {
  EXPECT_EQ(se3_act(SE3d(), Eigen::Vector3d(1, 2, 3)), Eigen::Vector3d(1, 2, 3));
}

TEST(Se3, ComposeWithInverseIsIdentity) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    const SE3d T = random_pose(rng, 1.0, 3.0);
    EXPECT_LT((se3_compose(T, se3_inverse(T)).matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(((T.inverse() * T).matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Se3, ExpLogRoundTrip) {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 100; ++i) {
    const SE3d T = random_pose(rng, 1.0, 2.0);
    const SE3d back = SE3d::exp(T.log());
    EXPECT_LT((back.matrix() - T.matrix()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Se3, ExpMatchesMatrixSeries) {
  // The 4x4 twist exponential pins the [rho; phi] layout and the V coupling.
  std::mt19937_64 rng(31);
  for (int i = 0; i < 20; ++i) {
    Vector6d xi;
    xi << random_vector(rng, 1.0), random_vector(rng, 0.7);
    Eigen::Matrix4d X = Eigen::Matrix4d::Zero();
    X.topLeftCorner<3, 3>() = hat(xi.tail<3>());
    X.topRightCorner<3, 1>() = xi.head<3>();
    Eigen::Matrix4d series = Eigen::Matrix4d::Identity(), term = Eigen::Matrix4d::Identity();
    for (int k = 1; k < 40; ++k) {
      term = term * X / k;
      series += term;
    }
    EXPECT_LT((SE3d::exp(xi).matrix() - series).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Camera, ProjectOnAxis) {
  PinholeCamerad cam;
  const Eigen::Vector2d uv = project(cam, Eigen::Vector3d(0, 0, 1));
  EXPECT_TRUE(uv.isZero(0.0));
}

TEST(Camera, ProjectBySubstitution) {
  PinholeCamerad cam;
  cam.fx = cam.fy = 100;
  cam.cx = cam.cy = 50;
  const Eigen::Vector2d uv = project(cam, Eigen::Vector3d(0.1, -0.2, 2));
  EXPECT_NEAR(uv.x(), 55.0, 1e-12);
  EXPECT_NEAR(uv.y(), 40.0, 1e-12);
}

TEST(Camera, ProjectBehindCameraThrows) {
  PinholeCamerad cam;
  try {
    project(cam, Eigen::Vector3d(0, 0, -1));
    FAIL() << "expected BehindCamera";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BehindCamera);
  }
  EXPECT_THROW(projection_jacobian(cam, Eigen::Vector3d(0, 0, 5e-4)), Error);
}

TEST(Camera, ProjectIsScaleCovariantInDepth) {
  const PinholeCamerad cam = vio::test::euroc_camera();
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> s(0.1, 10.0);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector3d p(0.3 * i / 50.0 - 0.1, 0.2, 2.0 + i * 0.01);
    const double k = s(rng);
    EXPECT_LT((project(cam, p) - project(cam, Eigen::Vector3d(k * p))).norm(), 1e-9);
  }
}

TEST(Camera, ProjectionJacobianExamples) {
  PinholeCamerad cam;
  EXPECT_TRUE(projection_jacobian(cam, Eigen::Vector3d(0, 0, 1)).isApprox(
      (Eigen::Matrix<double, 2, 3>() << 1, 0, 0, 0, 1, 0).finished()));

  cam.fx = 2;
  cam.fy = 3;
  Eigen::Matrix<double, 2, 3> expected;
  expected << 1, 0, -0.5, 0, 1.5, -0.75;
  EXPECT_LT((projection_jacobian(cam, Eigen::Vector3d(1, 1, 2)) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Camera, ProjectionJacobianMatchesFiniteDifferences) {
  const PinholeCamerad cam = vio::test::euroc_camera();
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> lateral(-2.0, 2.0), depth(0.5, 10.0);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d p(lateral(rng), lateral(rng), depth(rng));
    Eigen::Matrix<double, 2, 3> numeric;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d d = Eigen::Vector3d::Unit(k) * h;
      numeric.col(k) = (project(cam, Eigen::Vector3d(p + d)) - project(cam, Eigen::Vector3d(p - d))) / (2 * h);
    }
    EXPECT_LT(relative_error(projection_jacobian(cam, p), numeric), 1e-5);
  }
}

TEST(Camera, ReprojectionResidualIsZeroAtExactMeasurement) {
  std::mt19937_64 rng(43);
  const PinholeCamerad cam = vio::test::euroc_camera(random_pose(rng, 0.3, 0.1));
  const SE3d T_wb = random_pose(rng);
  const Eigen::Vector3d p_world = T_wb * cam.T_cb.inverse() * Eigen::Vector3d(0.3, -0.2, 4.0);
  const Eigen::Vector2d z = project(cam, Eigen::Vector3d(camera_from_world(cam, T_wb) * p_world));
  EXPECT_LT(reprojection_residual_and_jacobians(cam, T_wb, p_world, z).residual.norm(), 1e-9);
}

TEST(Camera, ReprojectionResidualAfterCameraShift) {
  const PinholeCamerad cam = vio::test::euroc_camera();
  const SE3d T_wb;
  const Eigen::Vector3d p_world(0.4, -0.3, 3.0);
  const Eigen::Vector2d z = project(cam, p_world);
  const SE3d moved(SO3d(), Eigen::Vector3d(0.01, 0, 0));
  const Eigen::Vector2d expected = z - project(cam, Eigen::Vector3d(moved.inverse() * p_world));
  EXPECT_LT((reprojection_residual_and_jacobians(cam, moved, p_world, z).residual - expected).norm(), 1e-12);
}

TEST(Camera, ReprojectionJacobiansMatchFiniteDifferences) {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> lateral(-1.5, 1.5), depth(1.0, 8.0);
  const double h = 1e-6;
  int checked = 0;
  for (int i = 0; i < 100; ++i) {
    const PinholeCamerad cam = vio::test::euroc_camera(random_pose(rng, 0.5, 0.1));
    const SE3d T_wb = random_pose(rng, 1.0, 2.0);
    const Eigen::Vector3d p_world =
        T_wb * cam.T_cb.inverse() * Eigen::Vector3d(lateral(rng), lateral(rng), depth(rng));
    const Eigen::Vector2d z = project(cam, Eigen::Vector3d(camera_from_world(cam, T_wb) * p_world)) +
                              Eigen::Vector2d(1.5, -0.7);
    const auto r = reprojection_residual_and_jacobians(cam, T_wb, p_world, z);

    Eigen::Matrix<double, 2, 6> J_pose;
    for (int k = 0; k < 6; ++k) {
      const Vector6d d = Vector6d::Unit(k) * h;
      J_pose.col(k) = (reprojection_residual_and_jacobians(cam, T_wb.retract(d), p_world, z).residual -
                       reprojection_residual_and_jacobians(cam, T_wb.retract(-d), p_world, z).residual) /
                      (2 * h);
    }
    Eigen::Matrix<double, 2, 3> J_point;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d d = Eigen::Vector3d::Unit(k) * h;
      J_point.col(k) = (reprojection_residual_and_jacobians(cam, T_wb, Eigen::Vector3d(p_world + d), z).residual -
                        reprojection_residual_and_jacobians(cam, T_wb, Eigen::Vector3d(p_world - d), z).residual) /
                       (2 * h);
    }
    EXPECT_LT(relative_error(r.J_pose, J_pose), 1e-5);
    EXPECT_LT(relative_error(r.J_point, J_point), 1e-5);
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(Camera, FloatInstantiation) {
  PinholeCamera<float> cam;
  cam.fx = cam.fy = 100.f;
  const Eigen::Vector2f uv = project(cam, Eigen::Vector3f(0.1f, -0.2f, 2.f));
  EXPECT_NEAR(uv.x(), 5.f, 1e-5f);
  const SE3<float> T = SE3<float>::exp(Vector6<float>::Constant(0.1f));
  EXPECT_TRUE((T * T.inverse()).matrix().isIdentity(1e-5f));
}
