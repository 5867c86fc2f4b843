#pragma once

#include <Eigen/Core>

#include "vio/geometry/so3.hpp"

namespace vio {

template <typename Scalar>
using Vector6 = Eigen::Matrix<Scalar, 6, 1>;

/**
 * Rigid transform in SE(3).
 *
 * Tangent layout is xi = [rho; phi] (translation part first). The group is
 * perturbed on the right everywhere in this library: T <- T * exp(delta).
 */
template <typename Scalar_>
class SE3 {
 public:
  using Scalar = Scalar_;
  using Tangent = Vector6<Scalar>;
  using Point = Vector3<Scalar>;

  SE3() : t_(Point::Zero()) {}
  SE3(const SO3<Scalar>& R, const Point& t) : R_(R), t_(t) {}

  static SE3 identity() { return SE3(); }

  static SE3 exp(const Tangent& xi) {
    const Point rho = xi.template head<3>();
    const Point phi = xi.template tail<3>();
    return SE3(SO3<Scalar>::exp(phi), so3_left_jacobian<Scalar>(phi) * rho);
  }

  Tangent log() const {
    const Point phi = R_.log();
    Tangent xi;
    xi.template head<3>() = so3_left_jacobian_inverse<Scalar>(phi) * t_;
    xi.template tail<3>() = phi;
    return xi;
  }

  SE3 inverse() const {
    const SO3<Scalar> Rinv = R_.inverse();
    return SE3(Rinv, -(Rinv * t_));
  }

  SE3 operator*(const SE3& other) const { return SE3(R_ * other.R_, R_ * other.t_ + t_); }
  Point operator*(const Point& p) const { return R_ * p + t_; }

  /// Right retraction used by the solver.
  SE3 retract(const Tangent& delta) const { return *this * SE3::exp(delta); }

  const SO3<Scalar>& rotation() const { return R_; }
  SO3<Scalar>& rotation() { return R_; }
  const Point& translation() const { return t_; }
  Point& translation() { return t_; }

  Eigen::Matrix<Scalar, 4, 4> matrix() const {
    Eigen::Matrix<Scalar, 4, 4> m = Eigen::Matrix<Scalar, 4, 4>::Identity();
    m.template topLeftCorner<3, 3>() = R_.matrix();
    m.template topRightCorner<3, 1>() = t_;
    return m;
  }

  template <typename Other>
  SE3<Other> cast() const {
    return SE3<Other>(R_.template cast<Other>(), t_.template cast<Other>());
  }

 private:
  SO3<Scalar> R_;
  Point t_;
};

using SE3d = SE3<double>;
using Vector6d = Vector6<double>;

template <typename Scalar>
SE3<Scalar> se3_exp(const Vector6<Scalar>& xi) {
  return SE3<Scalar>::exp(xi);
}

template <typename Scalar>
SE3<Scalar> se3_inverse(const SE3<Scalar>& T) {
  return T.inverse();
}

template <typename Scalar>
SE3<Scalar> se3_compose(const SE3<Scalar>& a, const SE3<Scalar>& b) {
  return a * b;
}

template <typename Scalar>
Vector3<Scalar> se3_act(const SE3<Scalar>& T, const Vector3<Scalar>& p) {
  return T * p;
}

}  // namespace vio
