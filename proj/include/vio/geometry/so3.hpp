#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "vio/common/error.hpp"

namespace vio {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

/// Below this angle (radians) exp/log and the Jacobians switch to series expansions.
inline constexpr double kSmallAngle = 1e-8;
/// so3_log refuses rotations closer than this to the cut locus at pi.
inline constexpr double kNearPiMargin = 1e-6;

template <typename Derived>
Matrix3<typename Derived::Scalar> hat(const Eigen::MatrixBase<Derived>& v) {
  using S = typename Derived::Scalar;
  Matrix3<S> m;
  m << S(0), -v(2), v(1),
       v(2), S(0), -v(0),
       -v(1), v(0), S(0);
  return m;
}

template <typename Derived>
Vector3<typename Derived::Scalar> vee(const Eigen::MatrixBase<Derived>& m) {
  return Vector3<typename Derived::Scalar>(m(2, 1), m(0, 2), m(1, 0));
}

/**
 * Rotation in SO(3), stored as an orthonormal 3x3 matrix.
 *
 * Composition is a plain matrix product; call renormalize() to project back
 * onto the group after very long chains.
 */
template <typename Scalar_>
class SO3 {
 public:
  using Scalar = Scalar_;
  using Tangent = Vector3<Scalar>;
  using Matrix = Matrix3<Scalar>;

  SO3() : R_(Matrix::Identity()) {}
  explicit SO3(const Matrix& R) : R_(R) {}
  explicit SO3(const Eigen::Quaternion<Scalar>& q) : R_(q.normalized().toRotationMatrix()) {}

  static SO3 identity() { return SO3(); }

  static SO3 exp(const Tangent& phi) {
    const Scalar theta2 = phi.squaredNorm();
    const Matrix K = hat(phi);
    if (theta2 < Scalar(kSmallAngle * kSmallAngle)) {
      return SO3(Matrix::Identity() + K + Scalar(0.5) * K * K);
    }
    const Scalar theta = std::sqrt(theta2);
    const Scalar a = std::sin(theta) / theta;
    const Scalar b = (Scalar(1) - std::cos(theta)) / theta2;
    return SO3(Matrix::Identity() + a * K + b * K * K);
  }

  /// Inverse of exp for rotation angles below pi - kNearPiMargin.
  Tangent log() const {
    const Scalar cos_theta = std::clamp((R_.trace() - Scalar(1)) * Scalar(0.5), Scalar(-1), Scalar(1));
    const Tangent v = Scalar(0.5) * vee(R_ - R_.transpose());
    const Scalar sin_theta = v.norm();
    const Scalar theta = std::atan2(sin_theta, cos_theta);
    if (theta > Scalar(M_PI - kNearPiMargin)) {
      throw Error(ErrorCode::AngleNearPi, "rotation angle too close to pi for a unique logarithm");
    }
    if (theta < Scalar(kSmallAngle)) {
      return v * (Scalar(1) + theta * theta / Scalar(6));
    }
    return v * (theta / sin_theta);
  }

  SO3 inverse() const { return SO3(R_.transpose()); }

  SO3 operator*(const SO3& other) const { return SO3(R_ * other.R_); }
  Tangent operator*(const Tangent& p) const { return R_ * p; }

  /// Projects back onto SO(3) after long composition chains.
  void renormalize() {
    Eigen::Quaternion<Scalar> q(R_);
    R_ = q.normalized().toRotationMatrix();
  }

  const Matrix& matrix() const { return R_; }
  Eigen::Quaternion<Scalar> quaternion() const { return Eigen::Quaternion<Scalar>(R_).normalized(); }

  template <typename Other>
  SO3<Other> cast() const {
    return SO3<Other>(R_.template cast<Other>());
  }

 private:
  Matrix R_;
};

using SO3d = SO3<double>;

/// Right Jacobian of SO(3): exp(phi + d) ~ exp(phi) exp(Jr(phi) d).
template <typename Scalar>
Matrix3<Scalar> so3_right_jacobian(const Vector3<Scalar>& phi) {
  const Scalar theta2 = phi.squaredNorm();
  const Matrix3<Scalar> K = hat(phi);
  if (theta2 < Scalar(kSmallAngle * kSmallAngle)) {
    return Matrix3<Scalar>::Identity() - Scalar(0.5) * K + K * K / Scalar(6);
  }
  const Scalar theta = std::sqrt(theta2);
  return Matrix3<Scalar>::Identity() - (Scalar(1) - std::cos(theta)) / theta2 * K +
         (theta - std::sin(theta)) / (theta2 * theta) * K * K;
}

template <typename Scalar>
Matrix3<Scalar> so3_right_jacobian_inverse(const Vector3<Scalar>& phi) {
  const Scalar theta2 = phi.squaredNorm();
  const Matrix3<Scalar> K = hat(phi);
  if (theta2 < Scalar(kSmallAngle * kSmallAngle)) {
    return Matrix3<Scalar>::Identity() + Scalar(0.5) * K + K * K / Scalar(12);
  }
  const Scalar theta = std::sqrt(theta2);
  return Matrix3<Scalar>::Identity() + Scalar(0.5) * K +
         (Scalar(1) / theta2 - (Scalar(1) + std::cos(theta)) / (Scalar(2) * theta * std::sin(theta))) * K * K;
}

/// Left Jacobian, which is also the V matrix coupling translation in SE(3) exp.
template <typename Scalar>
Matrix3<Scalar> so3_left_jacobian(const Vector3<Scalar>& phi) {
  return so3_right_jacobian<Scalar>(-phi);
}

template <typename Scalar>
Matrix3<Scalar> so3_left_jacobian_inverse(const Vector3<Scalar>& phi) {
  return so3_right_jacobian_inverse<Scalar>(-phi);
}

template <typename Scalar>
SO3<Scalar> so3_exp(const Vector3<Scalar>& phi) {
  return SO3<Scalar>::exp(phi);
}

template <typename Scalar>
Vector3<Scalar> so3_log(const SO3<Scalar>& R) {
  return R.log();
}

}  // namespace vio
