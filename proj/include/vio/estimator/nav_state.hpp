#pragma once

#include <Eigen/Core>

#include "vio/geometry/se3.hpp"
#include "vio/imu/types.hpp"

namespace vio {

/// Pose, world velocity and IMU biases at one timestamp.
struct NavState {
  SE3d T_wb;
  Eigen::Vector3d v_w{Eigen::Vector3d::Zero()};
  ImuBias bias;
  double t{0};
};

}  // namespace vio
