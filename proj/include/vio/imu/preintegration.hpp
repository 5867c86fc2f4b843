#pragma once

#include <span>

#include <Eigen/Core>

#include "vio/estimator/nav_state.hpp"
#include "vio/geometry/so3.hpp"
#include "vio/imu/types.hpp"

namespace vio {

using Matrix9d = Eigen::Matrix<double, 9, 9>;
using Vector9d = Eigen::Matrix<double, 9, 1>;
using Matrix9x15d = Eigen::Matrix<double, 9, 15>;

/**
 * Relative motion compounded from raw IMU samples between two keyframes.
 *
 * alpha/beta are expressed in the body frame of the first sample, gamma is
 * the incremental rotation. The bias Jacobians allow a first-order update
 * when the bias estimate moves away from `bias_ref`.
 */
struct PreintegratedImu {
  Eigen::Vector3d alpha{Eigen::Vector3d::Zero()};
  Eigen::Vector3d beta{Eigen::Vector3d::Zero()};
  SO3d gamma;
  Matrix9d covariance{Matrix9d::Zero()};  // ordered [alpha, beta, theta]
  double dt_total{0};
  ImuBias bias_ref;
  std::size_t sample_count{0};

  Eigen::Matrix3d d_alpha_d_ba{Eigen::Matrix3d::Zero()};
  Eigen::Matrix3d d_alpha_d_bg{Eigen::Matrix3d::Zero()};
  Eigen::Matrix3d d_beta_d_ba{Eigen::Matrix3d::Zero()};
  Eigen::Matrix3d d_beta_d_bg{Eigen::Matrix3d::Zero()};
  Eigen::Matrix3d d_gamma_d_bg{Eigen::Matrix3d::Zero()};

  Eigen::Vector3d corrected_alpha(const ImuBias& bias) const;
  Eigen::Vector3d corrected_beta(const ImuBias& bias) const;
  SO3d corrected_gamma(const ImuBias& bias) const;
};

/**
 * Midpoint-rule preintegration of `samples` (first and last sample bound the
 * interval). Throws EmptyStream for fewer than two samples and
 * NonMonotonicTime for non-increasing timestamps.
 */
PreintegratedImu preintegrate(std::span<const ImuSample> samples, const ImuBias& bias, const ImuNoiseParams& noise);

/// [position; velocity; rotation] residual between two states.
Vector9d imu_residual(const NavState& state_i, const NavState& state_j, const PreintegratedImu& pre,
                      const GravityModel& gravity);

struct ImuResidualJacobians {
  Vector9d residual;
  Matrix9x15d d_state_i;  // columns: [rho, phi, v, b_a, b_g]
  Matrix9x15d d_state_j;
};

ImuResidualJacobians imu_residual_jacobians(const NavState& state_i, const NavState& state_j,
                                            const PreintegratedImu& pre, const GravityModel& gravity);

/// Dead-reckons state_i forward over the preintegrated interval.
NavState predict_state(const NavState& state_i, const PreintegratedImu& pre, const GravityModel& gravity);

/// Information of the bias random-walk constraint b_j - b_i over `dt` seconds.
Eigen::Matrix<double, 6, 6> bias_walk_information(const ImuNoiseParams& noise, double dt);

}  // namespace vio
