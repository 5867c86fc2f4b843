#include "vio/uncertainty/uncertainty.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "vio/common/error.hpp"

namespace vio {

Eigen::Matrix2d propagate_to_pixel(const PinholeCamerad& cam, const SE3d& T_cw, const Eigen::Vector3d& p_world,
                                   const Eigen::Matrix3d& sigma_world) {
  const Eigen::Vector3d p_cam = T_cw * p_world;
  const Eigen::Matrix<double, 2, 3> J = projection_jacobian(cam, p_cam) * T_cw.rotation().matrix();
  const Eigen::Matrix2d sigma = J * sigma_world * J.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

AdaptiveInformation adaptive_information(const Eigen::Matrix2d& sigma_pixel, double lambda) {
  constexpr double kMaxCondition = 1e12;
  constexpr double kEpsilon = 1e-9;  // px^2
  const Eigen::Matrix2d sym = 0.5 * (sigma_pixel + sigma_pixel.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(sym, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(1);

  AdaptiveInformation out;
  if (lo > 0 && hi < kMaxCondition * lo) {
    out.omega = sym.inverse();
  } else {
    out.omega = (sym + kEpsilon * Eigen::Matrix2d::Identity()).inverse();
  }
  out.omega = 0.5 * (out.omega + out.omega.transpose()).eval();
  out.omega.diagonal().array() += lambda;
  return out;
}

Eigen::Matrix3d clamp_covariance(const Eigen::Matrix3d& sigma, double sigma_floor, double sigma_cap) {
  const Eigen::Matrix3d sym = 0.5 * (sigma + sigma.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(sym);
  const Eigen::Vector3d values =
      eig.eigenvalues().cwiseMax(sigma_floor * sigma_floor).cwiseMin(sigma_cap * sigma_cap);
  Eigen::Matrix3d out = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

Eigen::Matrix3d empirical_covariance(const PinholeCamerad& cam, const Eigen::Vector3d& position,
                                     std::span<const LearningObservation> observations, int& used) {
  Eigen::Matrix3d sum = Eigen::Matrix3d::Zero();
  used = 0;
  for (const LearningObservation& obs : observations) {
    const SE3d T_cw = camera_from_world(cam, obs.T_wb);
    const double depth = (T_cw * position).z();
    if (!(depth > 0)) continue;
    const Eigen::Vector3d ray(depth * obs.p_norm.x(), depth * obs.p_norm.y(), depth);
    const Eigen::Vector3d diff = T_cw.inverse() * ray - position;
    sum.noalias() += diff * diff.transpose();
    ++used;
  }
  return used > 0 ? Eigen::Matrix3d(sum / used) : Eigen::Matrix3d::Zero();
}

LandmarkUncertainty blend_uncertainty(const LandmarkUncertainty& current, const Eigen::Matrix3d& empirical,
                                      int samples, const UncertaintyOptions& options) {
  const Eigen::Matrix3d floored = clamp_covariance(empirical, options.sigma_floor, options.sigma_cap);
  const double w = samples / (samples + options.blend_n0);
  LandmarkUncertainty out;
  out.sigma_world = (1.0 - w) * current.sigma_world + w * floored;
  out.sigma_world = 0.5 * (out.sigma_world + out.sigma_world.transpose()).eval();
  out.source = UncertaintySource::Learned;
  out.sample_count = samples;
  return out;
}

std::vector<LandmarkUncertainty> learn_from_ba(const PinholeCamerad& cam, std::span<const LearningInput> landmarks,
                                               const UncertaintyOptions& options) {
  std::vector<LandmarkUncertainty> out;
  out.reserve(landmarks.size());
  for (const LearningInput& lm : landmarks) {
    int used = 0;
    const Eigen::Matrix3d empirical = empirical_covariance(cam, lm.position, lm.observations, used);
    if (used < options.min_obs) {
      out.push_back(lm.current);
    } else {
      out.push_back(blend_uncertainty(lm.current, empirical, used, options));
    }
  }
  return out;
}

namespace {

LandmarkUncertainty triangulation_covariance(const PinholeCamerad& cam, std::span<const SE3d> views,
                                             const Eigen::Vector3d& p_world, const UncertaintyOptions& options) {
  const double info0 = 1.0 / (options.pixel_sigma0 * options.pixel_sigma0);
  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  for (const SE3d& T_wb : views) {
    const SE3d T_cw = camera_from_world(cam, T_wb);
    const Eigen::Matrix<double, 2, 3> A = projection_jacobian(cam, Eigen::Vector3d(T_cw * p_world)) *
                                          T_cw.rotation().matrix();
    H.noalias() += info0 * A.transpose() * A;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(H);
  if (!(eig.eigenvalues()(0) > 1e-12 * eig.eigenvalues()(2))) {
    throw Error(ErrorCode::DegenerateBaseline, "triangulation is rank deficient");
  }
  LandmarkUncertainty out;
  out.sigma_world = clamp_covariance(H.inverse(), options.sigma_floor, options.sigma_cap);
  out.source = UncertaintySource::Geometric;
  out.sample_count = static_cast<int>(views.size());
  return out;
}

}  // namespace

LandmarkUncertainty geometric_prior(const PinholeCamerad& cam, const SE3d& T_wb_first, const SE3d& T_wb_second,
                                    const Eigen::Vector3d& p_world, const UncertaintyOptions& options) {
  const SE3d T_wc_first = T_wb_first * cam.T_cb.inverse();
  const SE3d T_wc_second = T_wb_second * cam.T_cb.inverse();
  const double baseline = (T_wc_first.translation() - T_wc_second.translation()).norm();
  if (!(baseline > options.min_baseline)) {
    throw Error(ErrorCode::DegenerateBaseline, "two-view baseline below minimum");
  }
  const SE3d views[] = {T_wb_first, T_wb_second};
  return triangulation_covariance(cam, views, p_world, options);
}

RefinementResult refine_iteratively(const RefinementHooks& hooks, int outer_iters, double tolerance) {
  RefinementResult result;
  for (int t = 0; t < std::max(outer_iters, 1); ++t) {
    hooks.forward();
    result.solves.push_back(hooks.optimize());
    result.last_change = hooks.backward();
    result.outer_iterations = t + 1;
    if (result.last_change < tolerance) break;
  }
  return result;
}

}  // namespace vio
