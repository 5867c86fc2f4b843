#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vio/geometry/se3.hpp"

namespace vio {

/// Value plus first and second time derivatives of a scalar signal.
struct SignalValue {
  double value{0}, rate{0}, accel{0};
};

/// Offset + linear drift + sum of sinusoids: smooth and analytically differentiable.
class SinusoidSignal {
 public:
  struct Term {
    double amplitude, frequency, phase;  // A sin(w t + phase)
  };

  SinusoidSignal() = default;
  SinusoidSignal(double offset, double slope, std::vector<Term> terms)
      : offset_(offset), slope_(slope), terms_(std::move(terms)) {}

  SignalValue at(double t) const;

 private:
  double offset_{0}, slope_{0};
  std::vector<Term> terms_;
};

/// Uniform cubic B-spline over scalar control points (C2 continuous).
class CubicBSpline {
 public:
  CubicBSpline() = default;
  CubicBSpline(std::vector<double> control_points, double knot_spacing)
      : ctrl_(std::move(control_points)), dt_(knot_spacing) {}

  SignalValue at(double t) const;
  double duration() const;

 private:
  std::vector<double> ctrl_;
  double dt_{1.0};
};

/// Ground-truth kinematics of the body at one instant.
struct MotionSample {
  SE3d T_wb;
  Eigen::Vector3d v_w{Eigen::Vector3d::Zero()};
  Eigen::Vector3d a_w{Eigen::Vector3d::Zero()};
  Eigen::Vector3d omega_b{Eigen::Vector3d::Zero()};
};

/**
 * Body trajectory built from six smooth channels: world position x, y, z and
 * ZYX Euler angles yaw, pitch, roll. Attitude rates are mapped to body
 * angular velocity analytically.
 */
class TrajectoryModel {
 public:
  enum class Kind { Circle, Lissajous, RandomSpline };

  struct CircleParams {
    Eigen::Vector3d center{0, 0, 1.5};
    double radius{1.5};
    double angular_rate{0.3};       // rad/s around the center
    double vertical_amplitude{0.6};  // m
    double vertical_rate{1.0};       // rad/s
    double pitch_amplitude{0.1};     // rad
    double roll_amplitude{0.1};      // rad
    double yaw_offset{0.0};          // rad, 0 faces outward
  };
  struct LissajousParams {
    Eigen::Vector3d center{0, 0, 1.5};
    Eigen::Vector3d amplitude{1.5, 1.0, 0.3};
    Eigen::Vector3d frequency{0.2, 0.3, 0.25};  // rad/s
    double yaw_rate{0.2};
    double pitch_amplitude{0.05};
    double roll_amplitude{0.05};
  };
  struct SplineParams {
    Eigen::Vector3d box_min{-2, -2, 1};
    Eigen::Vector3d box_max{2, 2, 2};
    double knot_spacing{2.0};  // s
    double yaw_step{0.5};      // rad std-dev per knot
    double tilt_amplitude{0.05};
  };

  static TrajectoryModel circle(const CircleParams& p);
  static TrajectoryModel lissajous(const LissajousParams& p);
  static TrajectoryModel random_spline(const SplineParams& p, double duration, std::uint64_t seed);

  MotionSample at(double t) const;
  Kind kind() const { return kind_; }

 private:
  template <typename Signal>
  struct Channels {
    Signal x, y, z, yaw, pitch, roll;
  };

  Kind kind_{Kind::Circle};
  Channels<SinusoidSignal> sines_;
  Channels<CubicBSpline> splines_;
};

}  // namespace vio
