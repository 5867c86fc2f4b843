#pragma once

#include <Eigen/Core>

#include "vio/common/error.hpp"
#include "vio/geometry/se3.hpp"

namespace vio {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;

/// Undistorted pinhole camera rigidly mounted on the body via T_cb.
template <typename Scalar_>
struct PinholeCamera {
  using Scalar = Scalar_;

  Scalar fx{1}, fy{1};
  Scalar cx{0}, cy{0};
  int width{1}, height{1};
  SE3<Scalar> T_cb;  // body -> camera
  Scalar z_min{1e-3};

  bool valid() const { return fx > 0 && fy > 0 && width > 0 && height > 0; }

  bool in_image(const Vector2<Scalar>& uv) const {
    return uv.x() >= 0 && uv.y() >= 0 && uv.x() < width && uv.y() < height;
  }

  /// (u, v) -> normalized image coordinate ((u-cx)/fx, (v-cy)/fy).
  Vector2<Scalar> normalize(const Vector2<Scalar>& uv) const {
    return Vector2<Scalar>((uv.x() - cx) / fx, (uv.y() - cy) / fy);
  }
};

using PinholeCamerad = PinholeCamera<double>;

template <typename Scalar>
void check_depth(const PinholeCamera<Scalar>& cam, const Vector3<Scalar>& p_cam) {
  if (!(p_cam.z() > cam.z_min)) {
    throw Error(ErrorCode::BehindCamera, "point depth below z_min");
  }
}

template <typename Scalar>
Vector2<Scalar> project(const PinholeCamera<Scalar>& cam, const Vector3<Scalar>& p_cam) {
  check_depth(cam, p_cam);
  const Scalar inv_z = Scalar(1) / p_cam.z();
  return Vector2<Scalar>(cam.fx * p_cam.x() * inv_z + cam.cx, cam.fy * p_cam.y() * inv_z + cam.cy);
}

/// d(project)/d(p_cam).
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 3> projection_jacobian(const PinholeCamera<Scalar>& cam, const Vector3<Scalar>& p_cam) {
  check_depth(cam, p_cam);
  const Scalar inv_z = Scalar(1) / p_cam.z();
  const Scalar inv_z2 = inv_z * inv_z;
  Eigen::Matrix<Scalar, 2, 3> J;
  J << cam.fx * inv_z, Scalar(0), -cam.fx * p_cam.x() * inv_z2,
       Scalar(0), cam.fy * inv_z, -cam.fy * p_cam.y() * inv_z2;
  return J;
}

/// World -> camera transform for a body pose: T_cw = T_cb * T_wb^-1.
template <typename Scalar>
SE3<Scalar> camera_from_world(const PinholeCamera<Scalar>& cam, const SE3<Scalar>& T_wb) {
  return cam.T_cb * T_wb.inverse();
}

template <typename Scalar>
struct ReprojectionResult {
  Vector2<Scalar> residual;
  Eigen::Matrix<Scalar, 2, 6> J_pose;   // w.r.t. right perturbation of T_wb
  Eigen::Matrix<Scalar, 2, 3> J_point;  // w.r.t. p_world
};

/**
 * Residual e = z - pi(T_cb * T_wb^-1 * p_world) and its Jacobians.
 *
 * Throws BehindCamera when the transformed point fails the depth check.
 */
template <typename Scalar>
ReprojectionResult<Scalar> reprojection_residual_and_jacobians(const PinholeCamera<Scalar>& cam,
                                                                const SE3<Scalar>& T_wb,
                                                                const Vector3<Scalar>& p_world,
                                                                const Vector2<Scalar>& z) {
  const Matrix3<Scalar> R_bw = T_wb.rotation().matrix().transpose();
  const Vector3<Scalar> p_body = R_bw * (p_world - T_wb.translation());
  const Matrix3<Scalar>& R_cb = cam.T_cb.rotation().matrix();
  const Vector3<Scalar> p_cam = R_cb * p_body + cam.T_cb.translation();

  ReprojectionResult<Scalar> out;
  out.residual = z - project(cam, p_cam);
  const Eigen::Matrix<Scalar, 2, 3> J_proj = projection_jacobian(cam, p_cam);
  const Eigen::Matrix<Scalar, 2, 3> J_body = -J_proj * R_cb;
  // T_wb * exp(delta): p_body -> p_body - rho + [p_body]x phi to first order.
  out.J_pose.template leftCols<3>() = -J_body;
  out.J_pose.template rightCols<3>() = J_body * hat(p_body);
  out.J_point = J_body * R_bw;
  return out;
}

}  // namespace vio
