#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "vio/geometry/camera.hpp"
#include "vio/geometry/se3.hpp"
#include "vio/solver/levenberg_marquardt.hpp"

namespace vio {

enum class UncertaintySource { Prior, Geometric, Learned };

constexpr std::string_view to_string(UncertaintySource s) {
  switch (s) {
    case UncertaintySource::Prior: return "prior";
    case UncertaintySource::Geometric: return "geometric";
    case UncertaintySource::Learned: return "learned";
  }
  return "unknown";
}

/// World-frame 3x3 position covariance of one landmark (m^2).
struct LandmarkUncertainty {
  Eigen::Matrix3d sigma_world{Eigen::Matrix3d::Identity() * 0.05 * 0.05};
  UncertaintySource source{UncertaintySource::Prior};
  int sample_count{0};
};

/// 2x2 pixel-space information matrix (px^-2).
struct AdaptiveInformation {
  Eigen::Matrix2d omega{Eigen::Matrix2d::Identity()};
};

struct UncertaintyOptions {
  double lambda{1e-6};        // px^-2 regularizer added to every information matrix
  double sigma_floor{1e-3};   // m, per axis
  double sigma_cap{1.0};      // m, per axis
  int min_obs{3};             // observations needed before a landmark is learned
  double blend_n0{5.0};       // pseudo-count of the previous estimate
  double pixel_sigma0{3.0};   // px, pixel noise assumed by the geometric prior
  double prior_sigma{0.05};   // m, isotropic prior when no geometry is available
  double min_baseline{0.01};  // m
  int outer_iters{2};
  double convergence_tol{0.05};  // relative trace change that ends the outer loop
};

/// J_pi R_cw Sigma_world R_cw^T J_pi^T at p_cam = T_cw p_world. Throws BehindCamera.
Eigen::Matrix2d propagate_to_pixel(const PinholeCamerad& cam, const SE3d& T_cw, const Eigen::Vector3d& p_world,
                                   const Eigen::Matrix3d& sigma_world);

/// Sigma_pixel^-1 + lambda I, falling back to (Sigma_pixel + eps I)^-1 + lambda I when ill-conditioned.
AdaptiveInformation adaptive_information(const Eigen::Matrix2d& sigma_pixel, double lambda);

/// Clamps the eigenvalues of a covariance into [floor^2, cap^2] and symmetrizes it.
Eigen::Matrix3d clamp_covariance(const Eigen::Matrix3d& sigma, double sigma_floor, double sigma_cap);

/// One keyframe's view of a landmark: optimized body pose plus the measured normalized coordinate.
struct LearningObservation {
  SE3d T_wb;
  Eigen::Vector2d p_norm;
};

struct LearningInput {
  Eigen::Vector3d position;  // optimized landmark position (the mean)
  std::vector<LearningObservation> observations;
  LandmarkUncertainty current;
};

/**
 * Re-triangulates the landmark along every measured ray at the depth of the
 * optimized point and returns (1/n) sum (p_k - p)(p_k - p)^T. Observations
 * with non-positive depth are skipped; `used` receives the sample count.
 */
Eigen::Matrix3d empirical_covariance(const PinholeCamerad& cam, const Eigen::Vector3d& position,
                                     std::span<const LearningObservation> observations, int& used);

/// Floors the empirical covariance and blends it into the current estimate with weight n / (n + n0).
LandmarkUncertainty blend_uncertainty(const LandmarkUncertainty& current, const Eigen::Matrix3d& empirical,
                                      int samples, const UncertaintyOptions& options);

/// Statistical learning pass over a set of optimized landmarks. Landmarks with
/// fewer than min_obs usable observations keep their current uncertainty.
std::vector<LandmarkUncertainty> learn_from_ba(const PinholeCamerad& cam, std::span<const LearningInput> landmarks,
                                               const UncertaintyOptions& options);

/**
 * First-order covariance of a point triangulated from two views,
 * (A^T Omega0 A)^-1 with A the stacked reprojection Jacobians w.r.t. the point.
 * Throws DegenerateBaseline when the camera centers are closer than min_baseline.
 */
LandmarkUncertainty geometric_prior(const PinholeCamerad& cam, const SE3d& T_wb_first, const SE3d& T_wb_second,
                                    const Eigen::Vector3d& p_world, const UncertaintyOptions& options);

/// Callbacks that bind the alternating refinement loop to a concrete window.
struct RefinementHooks {
  std::function<void()> forward;           // rebuild adaptive information from the current uncertainties
  std::function<SolveReport()> optimize;   // bundle adjustment with that weighting
  std::function<double()> backward;        // learning pass; returns max relative trace change
};

struct RefinementResult {
  int outer_iterations{0};
  double last_change{0};
  std::vector<SolveReport> solves;
};

/// Forward / optimize / backward alternation, at most `outer_iters` rounds or until
/// the relative trace change drops below `tolerance`.
RefinementResult refine_iteratively(const RefinementHooks& hooks, int outer_iters, double tolerance);

}  // namespace vio
