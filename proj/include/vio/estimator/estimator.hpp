#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "vio/estimator/window.hpp"
#include "vio/solver/levenberg_marquardt.hpp"

namespace vio {

enum class Mode { Baseline, Phase1, Phase2 };

std::string_view to_string(Mode mode);
/// Throws ConfigError for anything but baseline, phase1 or phase2.
Mode parse_mode(std::string_view text);

/**
 * Baseline weights every observation with the identity; Phase1 propagates the
 * two-view geometric prior; Phase2 additionally learns the landmark
 * covariances after every window solve.
 */
struct ModeConfig {
  Mode mode{Mode::Baseline};

  bool adaptive() const { return mode != Mode::Baseline; }
  bool learns() const { return mode == Mode::Phase2; }
};

struct EstimatorConfig {
  ModeConfig mode;
  int window_size{10};
  int keyframe_interval{4};
  double keyframe_overlap{0.6};  // new keyframe when the shared-landmark ratio drops below this
  double min_parallax_deg{1.0};
  int min_pnp_landmarks{4};
  double rebias_threshold{1e-3};
  double bias_prior_accel{0.05};  // m/s^2, sigma of the anchor-keyframe bias prior
  double bias_prior_gyro{0.005};  // rad/s
  ImuNoiseParams imu_noise;
  UncertaintyOptions uncertainty;
  SolveOptions ba_solver;
  SolveOptions pnp_solver;
  bool export_pixel_covariance{true};
};

struct StageStats {
  long count{0};
  double total_ms{0};
  double max_ms{0};

  void add(double ms);
  double mean_ms() const { return count ? total_ms / count : 0.0; }
};

/// Counters and wall-clock statistics collected while running.
struct Instrumentation {
  long learn_calls{0};
  long forward_passes{0};
  long ba_solves{0};
  long preintegration_refreshes{0};
  StageStats tracking;     // PnP per frame
  StageStats ba_total;     // optimize_window, end to end
  StageStats solver;       // LM solves inside optimize_window
  StageStats propagation;  // covariance propagation and information building inside BA
  StageStats learning;     // learn_from_ba inside BA
};

/// One projected 2x2 pixel covariance (export format for ellipse plotting).
struct PixelCovarianceRow {
  int frame_id{0};
  int landmark_id{0};
  Eigen::Matrix2d sigma{Eigen::Matrix2d::Zero()};
};

/// Ω for one observation under the given mode; identity for baseline.
Eigen::Matrix2d observation_information(const PinholeCamerad& cam, const SE3d& T_wb, const Landmark& landmark,
                                        const ModeConfig& mode, const UncertaintyOptions& options,
                                        Eigen::Matrix2d* sigma_pixel = nullptr);

struct TrackResult {
  SE3d T_wb;
  SolveReport report;
  int landmarks_used{0};
  std::vector<PixelCovarianceRow> pixel_covariances;
};

/**
 * Pose-only PnP against the initialized window landmarks, seeded with `seed`.
 * Throws InsufficientLandmarks below config.min_pnp_landmarks usable points.
 */
TrackResult track_frame(const PinholeCamerad& cam, const FrameObservations& frame, const SE3d& seed,
                        const std::map<int, Landmark>& landmarks, const EstimatorConfig& config);

/// Midpoint of the closest points between two viewing rays; nullopt when the
/// rays are parallel, the point is behind either camera or parallax is below `min_parallax_deg`.
std::optional<Eigen::Vector3d> triangulate_midpoint(const PinholeCamerad& cam, const SE3d& T_wb_a,
                                                    const Eigen::Vector2d& p_norm_a, const SE3d& T_wb_b,
                                                    const Eigen::Vector2d& p_norm_b, double min_parallax_deg);

/// Triangulates pending tracks from their first observing keyframe and the newest one.
int initialize_landmarks(SlidingWindow& window, const PinholeCamerad& cam, const EstimatorConfig& config);

struct WindowOptions {
  bool use_imu{true};
  bool fix_gauge{true};
};

struct WindowOptimization {
  SolveReport report;  // last inner solve
  RefinementResult refinement;
  int landmarks{0};
  int observations{0};
};

/**
 * Sliding-window bundle adjustment over poses, velocities, biases and landmarks.
 * Phase2 wraps the solve in the forward / optimize / backward refinement loop.
 * Results are written back only after every solve succeeded; solver errors
 * propagate with the window untouched.
 */
WindowOptimization optimize_window(SlidingWindow& window, const Calibration& calib, const EstimatorConfig& config,
                                   const WindowOptions& options = {}, Instrumentation* stats = nullptr);

struct FrameEstimate {
  int frame_id{0};
  NavState state;
  bool keyframe{false};
  bool dead_reckoned{false};
};

/// Sequential tracking + keyframing + window optimization.
class Estimator {
 public:
  Estimator(Calibration calib, EstimatorConfig config);

  void initialize(const NavState& state);
  bool initialized() const { return initialized_; }

  void add_imu(const ImuSample& sample);
  FrameEstimate process_frame(const FrameObservations& frame);

  /// Landmarks removed from the window so far, then everything still live.
  std::vector<Landmark> landmark_history() const;

  const SlidingWindow& window() const { return window_; }
  const Instrumentation& stats() const { return stats_; }
  const std::vector<PixelCovarianceRow>& pixel_covariances() const { return pixel_covariances_; }
  long failed_window_solves() const { return failed_solves_; }

 private:
  std::vector<ImuSample> imu_between(double t0, double t1) const;
  bool is_keyframe(const FrameObservations& frame) const;

  Calibration calib_;
  EstimatorConfig config_;
  SlidingWindow window_;
  Instrumentation stats_;
  std::vector<ImuSample> imu_;
  std::vector<Landmark> retired_;
  std::vector<PixelCovarianceRow> pixel_covariances_;
  NavState current_;
  int frames_since_keyframe_{0};
  bool initialized_{false};
  bool has_frame_{false};
  long failed_solves_{0};
};

}  // namespace vio
