#pragma once

#include <cmath>
#include <random>

#include <Eigen/Core>

#include "vio/estimator/nav_state.hpp"
#include "vio/geometry/camera.hpp"
#include "vio/geometry/se3.hpp"
#include "vio/simulator/simulator.hpp"

namespace vio::test {

inline Eigen::Vector3d random_vector(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  return {n(rng), n(rng), n(rng)};
}

inline SE3d random_pose(std::mt19937_64& rng, double angle = 1.0, double translation = 1.0) {
  Eigen::Vector3d phi = random_vector(rng, angle);
  if (phi.norm() > 2.5) phi *= 2.5 / phi.norm();
  return SE3d(SO3d::exp(phi), random_vector(rng, translation));
}

inline PinholeCamerad euroc_camera(const SE3d& T_cb = SE3d()) {
  PinholeCamerad cam;
  cam.fx = 458.654;
  cam.fy = 457.296;
  cam.cx = 367.215;
  cam.cy = 248.375;
  cam.width = 752;
  cam.height = 480;
  cam.T_cb = T_cb;
  return cam;
}

/// Relative max-abs error with an absolute floor so near-zero entries do not blow up.
template <typename A, typename B>
double relative_error(const Eigen::MatrixBase<A>& analytic, const Eigen::MatrixBase<B>& numeric) {
  const double scale = std::max(1.0, numeric.cwiseAbs().maxCoeff());
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

/// Short scenario used by the integration-style tests: same room and camera as
/// the bundled configs but a few seconds long.
inline ScenarioConfig small_scenario(double duration, bool noiseless, std::uint64_t seed = 7) {
  ScenarioConfig c = parse_scenario(ConfigFile::parse(""));
  c.name = "small";
  c.seed = seed;
  c.duration = duration;
  if (noiseless) {
    c.imu_noise = ImuNoiseParams{0, 0, 0, 0};
    c.initial_bias = ImuBias{};
    c.pixel_noise.model = PixelNoiseModel::None;
  }
  return c;
}

}  // namespace vio::test
