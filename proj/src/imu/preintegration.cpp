#include "vio/imu/preintegration.hpp"

#include "vio/common/error.hpp"

namespace vio {

Eigen::Vector3d PreintegratedImu::corrected_alpha(const ImuBias& bias) const {
  return alpha + d_alpha_d_ba * (bias.accel - bias_ref.accel) + d_alpha_d_bg * (bias.gyro - bias_ref.gyro);
}

Eigen::Vector3d PreintegratedImu::corrected_beta(const ImuBias& bias) const {
  return beta + d_beta_d_ba * (bias.accel - bias_ref.accel) + d_beta_d_bg * (bias.gyro - bias_ref.gyro);
}

SO3d PreintegratedImu::corrected_gamma(const ImuBias& bias) const {
  return gamma * SO3d::exp(d_gamma_d_bg * (bias.gyro - bias_ref.gyro));
}

PreintegratedImu preintegrate(std::span<const ImuSample> samples, const ImuBias& bias, const ImuNoiseParams& noise) {
  if (samples.size() < 2) {
    throw Error(ErrorCode::EmptyStream, "preintegration needs at least two samples");
  }
  PreintegratedImu pre;
  pre.bias_ref = bias;
  pre.sample_count = samples.size();

  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  Eigen::Matrix<double, 9, 9> F;
  Eigen::Matrix<double, 9, 6> G;

  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    const ImuSample& s0 = samples[k];
    const ImuSample& s1 = samples[k + 1];
    const double dt = s1.t - s0.t;
    if (!(dt > 0)) {
      throw Error(ErrorCode::NonMonotonicTime, "IMU timestamps must strictly increase");
    }

    const Eigen::Vector3d omega = 0.5 * (s0.omega + s1.omega) - bias.gyro;
    const Eigen::Vector3d a0 = s0.accel - bias.accel;
    const Eigen::Vector3d a1 = s1.accel - bias.accel;
    const Eigen::Vector3d rot_vec = omega * dt;
    const SO3d dR = SO3d::exp(rot_vec);
    const Eigen::Matrix3d Jr = so3_right_jacobian<double>(rot_vec);

    const Eigen::Matrix3d R0 = pre.gamma.matrix();
    const SO3d gamma_next = pre.gamma * dR;
    const Eigen::Matrix3d R1 = gamma_next.matrix();
    const Eigen::Matrix3d dRt = dR.matrix().transpose();

    const Eigen::Vector3d acc = 0.5 * (R0 * a0 + R1 * a1);

    // Linearized dependence of the averaged acceleration on the errors.
    const Eigen::Matrix3d A_theta = -0.5 * (R0 * hat(a0) + R1 * hat(a1) * dRt);
    const Eigen::Matrix3d A_bg = 0.5 * R1 * hat(a1) * Jr * dt;
    const Eigen::Matrix3d A_ba = -0.5 * (R0 + R1);

    const Eigen::Matrix3d dacc_dbg = A_theta * pre.d_gamma_d_bg + A_bg;
    pre.d_alpha_d_ba += pre.d_beta_d_ba * dt + 0.5 * dt * dt * A_ba;
    pre.d_alpha_d_bg += pre.d_beta_d_bg * dt + 0.5 * dt * dt * dacc_dbg;
    pre.d_beta_d_ba += dt * A_ba;
    pre.d_beta_d_bg += dt * dacc_dbg;
    pre.d_gamma_d_bg = dRt * pre.d_gamma_d_bg - Jr * dt;

    F.setIdentity();
    F.block<3, 3>(0, 3) = I * dt;
    F.block<3, 3>(0, 6) = 0.5 * dt * dt * A_theta;
    F.block<3, 3>(3, 6) = dt * A_theta;
    F.block<3, 3>(6, 6) = dRt;
    G.setZero();
    G.block<3, 3>(0, 0) = 0.5 * dt * dt * A_bg;
    G.block<3, 3>(0, 3) = 0.5 * dt * dt * A_ba;
    G.block<3, 3>(3, 0) = dt * A_bg;
    G.block<3, 3>(3, 3) = dt * A_ba;
    G.block<3, 3>(6, 0) = -Jr * dt;

    Eigen::Matrix<double, 6, 1> q;
    const double gv = noise.gyro_noise * noise.gyro_noise / dt;
    const double av = noise.accel_noise * noise.accel_noise / dt;
    q << gv, gv, gv, av, av, av;

    pre.covariance = F * pre.covariance * F.transpose() + G * q.asDiagonal() * G.transpose();
    pre.covariance = 0.5 * (pre.covariance + pre.covariance.transpose()).eval();

    pre.alpha += pre.beta * dt + 0.5 * acc * dt * dt;
    pre.beta += acc * dt;
    pre.gamma = gamma_next;
    pre.dt_total += dt;
  }
  pre.gamma.renormalize();
  return pre;
}

namespace {

struct ResidualParts {
  Eigen::Vector3d dp_body;  // R_i^T (p_j - p_i - v_i dt - g dt^2 / 2)
  Eigen::Vector3d dv_body;  // R_i^T (v_j - v_i - g dt)
  SO3d rot_error;           // gamma_c^-1 R_i^T R_j
  Vector9d residual;
};

ResidualParts evaluate_parts(const NavState& si, const NavState& sj, const PreintegratedImu& pre,
                             const GravityModel& gravity) {
  const double dt = pre.dt_total;
  const Eigen::Vector3d& g = gravity.g_world;
  const Eigen::Matrix3d Rit = si.T_wb.rotation().matrix().transpose();
  ResidualParts out;
  out.dp_body = Rit * (sj.T_wb.translation() - si.T_wb.translation() - si.v_w * dt - 0.5 * g * dt * dt);
  out.dv_body = Rit * (sj.v_w - si.v_w - g * dt);
  out.rot_error = pre.corrected_gamma(si.bias).inverse() * si.T_wb.rotation().inverse() * sj.T_wb.rotation();
  out.residual.segment<3>(0) = out.dp_body - pre.corrected_alpha(si.bias);
  out.residual.segment<3>(3) = out.dv_body - pre.corrected_beta(si.bias);
  out.residual.segment<3>(6) = out.rot_error.log();
  return out;
}

}  // namespace

Vector9d imu_residual(const NavState& state_i, const NavState& state_j, const PreintegratedImu& pre,
                      const GravityModel& gravity) {
  return evaluate_parts(state_i, state_j, pre, gravity).residual;
}

ImuResidualJacobians imu_residual_jacobians(const NavState& si, const NavState& sj, const PreintegratedImu& pre,
                                            const GravityModel& gravity) {
  const ResidualParts parts = evaluate_parts(si, sj, pre, gravity);
  const double dt = pre.dt_total;
  const Eigen::Matrix3d Rit = si.T_wb.rotation().matrix().transpose();
  const Eigen::Matrix3d Rj = sj.T_wb.rotation().matrix();
  const Eigen::Vector3d r_rot = parts.residual.segment<3>(6);
  const Eigen::Matrix3d Jr_inv = so3_right_jacobian_inverse<double>(r_rot);
  const Eigen::Vector3d dbg = si.bias.gyro - pre.bias_ref.gyro;

  ImuResidualJacobians out;
  out.residual = parts.residual;
  out.d_state_i.setZero();
  out.d_state_j.setZero();

  // Position block.
  out.d_state_i.block<3, 3>(0, 0) = -Eigen::Matrix3d::Identity();
  out.d_state_i.block<3, 3>(0, 3) = hat(parts.dp_body);
  out.d_state_i.block<3, 3>(0, 6) = -Rit * dt;
  out.d_state_i.block<3, 3>(0, 9) = -pre.d_alpha_d_ba;
  out.d_state_i.block<3, 3>(0, 12) = -pre.d_alpha_d_bg;
  out.d_state_j.block<3, 3>(0, 0) = Rit * Rj;

  // Velocity block.
  out.d_state_i.block<3, 3>(3, 3) = hat(parts.dv_body);
  out.d_state_i.block<3, 3>(3, 6) = -Rit;
  out.d_state_i.block<3, 3>(3, 9) = -pre.d_beta_d_ba;
  out.d_state_i.block<3, 3>(3, 12) = -pre.d_beta_d_bg;
  out.d_state_j.block<3, 3>(3, 6) = Rit;

  // Rotation block.
  out.d_state_i.block<3, 3>(6, 3) = -Jr_inv * Rj.transpose() * si.T_wb.rotation().matrix();
  out.d_state_i.block<3, 3>(6, 12) = -Jr_inv * parts.rot_error.inverse().matrix() *
                                     so3_right_jacobian<double>(pre.d_gamma_d_bg * dbg) * pre.d_gamma_d_bg;
  out.d_state_j.block<3, 3>(6, 3) = Jr_inv;
  return out;
}

NavState predict_state(const NavState& si, const PreintegratedImu& pre, const GravityModel& gravity) {
  const double dt = pre.dt_total;
  const Eigen::Vector3d& g = gravity.g_world;
  const Eigen::Matrix3d Ri = si.T_wb.rotation().matrix();
  NavState sj;
  sj.bias = si.bias;
  sj.t = si.t + dt;
  sj.v_w = si.v_w + g * dt + Ri * pre.corrected_beta(si.bias);
  sj.T_wb = SE3d(si.T_wb.rotation() * pre.corrected_gamma(si.bias),
                 si.T_wb.translation() + si.v_w * dt + 0.5 * g * dt * dt + Ri * pre.corrected_alpha(si.bias));
  return sj;
}

Eigen::Matrix<double, 6, 6> bias_walk_information(const ImuNoiseParams& noise, double dt) {
  Eigen::Matrix<double, 6, 1> var;
  const double va = noise.accel_walk * noise.accel_walk * dt;
  const double vg = noise.gyro_walk * noise.gyro_walk * dt;
  var << va, va, va, vg, vg, vg;
  return var.cwiseInverse().asDiagonal();
}

}  // namespace vio
