#include "vio/simulator/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace vio {

SignalValue SinusoidSignal::at(double t) const {
  SignalValue out{offset_ + slope_ * t, slope_, 0.0};
  for (const Term& term : terms_) {
    const double arg = term.frequency * t + term.phase;
    out.value += term.amplitude * std::sin(arg);
    out.rate += term.amplitude * term.frequency * std::cos(arg);
    out.accel -= term.amplitude * term.frequency * term.frequency * std::sin(arg);
  }
  return out;
}

double CubicBSpline::duration() const {
  return ctrl_.size() >= 4 ? (static_cast<double>(ctrl_.size()) - 3.0) * dt_ : 0.0;
}

SignalValue CubicBSpline::at(double t) const {
  const int segments = static_cast<int>(ctrl_.size()) - 3;
  const double s = std::max(t, 0.0) / dt_;
  const int i = std::clamp(static_cast<int>(std::floor(s)), 0, segments - 1);
  const double u = s - i;
  const double p0 = ctrl_[i], p1 = ctrl_[i + 1], p2 = ctrl_[i + 2], p3 = ctrl_[i + 3];
  // Uniform cubic B-spline basis in power form.
  const double c0 = (p0 + 4 * p1 + p2) / 6.0;
  const double c1 = (-3 * p0 + 3 * p2) / 6.0;
  const double c2 = (3 * p0 - 6 * p1 + 3 * p2) / 6.0;
  const double c3 = (-p0 + 3 * p1 - 3 * p2 + p3) / 6.0;
  SignalValue out;
  out.value = c0 + u * (c1 + u * (c2 + u * c3));
  out.rate = (c1 + u * (2 * c2 + 3 * c3 * u)) / dt_;
  out.accel = (2 * c2 + 6 * c3 * u) / (dt_ * dt_);
  return out;
}

TrajectoryModel TrajectoryModel::circle(const CircleParams& p) {
  TrajectoryModel m;
  m.kind_ = Kind::Circle;
  const double w = p.angular_rate;
  m.sines_.x = SinusoidSignal(p.center.x(), 0, {{p.radius, w, M_PI / 2}});
  m.sines_.y = SinusoidSignal(p.center.y(), 0, {{p.radius, w, 0}});
  m.sines_.z = SinusoidSignal(p.center.z(), 0, {{p.vertical_amplitude, p.vertical_rate, 0}});
  m.sines_.yaw = SinusoidSignal(p.yaw_offset, w, {});
  m.sines_.pitch = SinusoidSignal(0, 0, {{p.pitch_amplitude, 1.3 * w + 0.4, 0.3}});
  m.sines_.roll = SinusoidSignal(0, 0, {{p.roll_amplitude, 1.7 * w + 0.5, 1.1}});
  return m;
}

TrajectoryModel TrajectoryModel::lissajous(const LissajousParams& p) {
  TrajectoryModel m;
  m.kind_ = Kind::Lissajous;
  m.sines_.x = SinusoidSignal(p.center.x(), 0, {{p.amplitude.x(), p.frequency.x(), 0}});
  m.sines_.y = SinusoidSignal(p.center.y(), 0, {{p.amplitude.y(), p.frequency.y(), M_PI / 4}});
  m.sines_.z = SinusoidSignal(p.center.z(), 0, {{p.amplitude.z(), p.frequency.z(), 0}});
  m.sines_.yaw = SinusoidSignal(0, p.yaw_rate, {});
  m.sines_.pitch = SinusoidSignal(0, 0, {{p.pitch_amplitude, 0.7, 0.3}});
  m.sines_.roll = SinusoidSignal(0, 0, {{p.roll_amplitude, 0.9, 1.1}});
  return m;
}

TrajectoryModel TrajectoryModel::random_spline(const SplineParams& p, double duration, std::uint64_t seed) {
  TrajectoryModel m;
  m.kind_ = Kind::RandomSpline;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const int knots = static_cast<int>(std::ceil(duration / p.knot_spacing)) + 4;
  std::vector<double> x, y, z, yaw, pitch, roll;
  std::normal_distribution<double> normal(0.0, 1.0);
  double heading = 0.0;
  for (int k = 0; k < knots; ++k) {
    std::uniform_real_distribution<double> ux(p.box_min.x(), p.box_max.x());
    std::uniform_real_distribution<double> uy(p.box_min.y(), p.box_max.y());
    std::uniform_real_distribution<double> uz(p.box_min.z(), p.box_max.z());
    x.push_back(ux(rng));
    y.push_back(uy(rng));
    z.push_back(uz(rng));
    heading += p.yaw_step * normal(rng);
    yaw.push_back(heading);
    pitch.push_back(p.tilt_amplitude * normal(rng));
    roll.push_back(p.tilt_amplitude * normal(rng));
  }
  m.splines_.x = CubicBSpline(x, p.knot_spacing);
  m.splines_.y = CubicBSpline(y, p.knot_spacing);
  m.splines_.z = CubicBSpline(z, p.knot_spacing);
  m.splines_.yaw = CubicBSpline(yaw, p.knot_spacing);
  m.splines_.pitch = CubicBSpline(pitch, p.knot_spacing);
  m.splines_.roll = CubicBSpline(roll, p.knot_spacing);
  return m;
}

namespace {

template <typename Channels>
MotionSample evaluate(const Channels& c, double t) {
  const SignalValue x = c.x.at(t), y = c.y.at(t), z = c.z.at(t);
  const SignalValue yaw = c.yaw.at(t), pitch = c.pitch.at(t), roll = c.roll.at(t);

  const Eigen::Matrix3d R = (Eigen::AngleAxisd(yaw.value, Eigen::Vector3d::UnitZ()) *
                             Eigen::AngleAxisd(pitch.value, Eigen::Vector3d::UnitY()) *
                             Eigen::AngleAxisd(roll.value, Eigen::Vector3d::UnitX()))
                                .toRotationMatrix();
  const double sr = std::sin(roll.value), cr = std::cos(roll.value);
  const double sp = std::sin(pitch.value), cp = std::cos(pitch.value);

  MotionSample s;
  s.T_wb = SE3d(SO3d(R), Eigen::Vector3d(x.value, y.value, z.value));
  s.v_w = Eigen::Vector3d(x.rate, y.rate, z.rate);
  s.a_w = Eigen::Vector3d(x.accel, y.accel, z.accel);
  s.omega_b = Eigen::Vector3d(roll.rate - yaw.rate * sp,
                              pitch.rate * cr + yaw.rate * sr * cp,
                              -pitch.rate * sr + yaw.rate * cr * cp);
  return s;
}

}  // namespace

MotionSample TrajectoryModel::at(double t) const {
  return kind_ == Kind::RandomSpline ? evaluate(splines_, t) : evaluate(sines_, t);
}

}  // namespace vio
