#pragma once

#include <Eigen/Core>

namespace vio {

struct ImuSample {
  double t{0};               // s
  Eigen::Vector3d omega{Eigen::Vector3d::Zero()};  // rad/s
  Eigen::Vector3d accel{Eigen::Vector3d::Zero()};  // m/s^2
};

struct ImuBias {
  Eigen::Vector3d accel{Eigen::Vector3d::Zero()};  // b_a, m/s^2
  Eigen::Vector3d gyro{Eigen::Vector3d::Zero()};   // b_g, rad/s

  Eigen::Matrix<double, 6, 1> vector() const {
    Eigen::Matrix<double, 6, 1> v;
    v << accel, gyro;
    return v;
  }
};

/// Continuous-time white-noise densities and bias random walks.
struct ImuNoiseParams {
  double gyro_noise{1.6968e-4};   // rad/s/sqrt(Hz)
  double accel_noise{2.0e-3};     // m/s^2/sqrt(Hz)
  double gyro_walk{1.9393e-5};    // rad/s^2/sqrt(Hz)
  double accel_walk{3.0e-3};      // m/s^3/sqrt(Hz)
};

struct GravityModel {
  Eigen::Vector3d g_world{0.0, 0.0, -9.81};
};

}  // namespace vio
