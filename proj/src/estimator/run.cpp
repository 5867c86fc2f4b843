#include "vio/estimator/run.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vio/common/csv.hpp"
#include "vio/common/error.hpp"

namespace vio {
namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::ConfigError, message);
}

nlohmann::json stage_json(const StageStats& s) {
  return {{"count", s.count}, {"mean_ms", s.mean_ms()}, {"max_ms", s.max_ms}, {"total_ms", s.total_ms}};
}

void write_file(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::DatasetFormatError, "cannot write " + file.string());
  out << text;
}

}  // namespace

EstimatorConfig parse_run_config(const ConfigFile& cfg) {
  EstimatorConfig c;
  c.mode.mode = parse_mode(cfg.get_string("estimator.mode", "baseline"));
  c.window_size = cfg.get_int("estimator.window_size", c.window_size);
  c.keyframe_interval = cfg.get_int("estimator.keyframe_interval", c.keyframe_interval);
  c.keyframe_overlap = cfg.get_double("estimator.keyframe_overlap", c.keyframe_overlap);
  c.min_parallax_deg = cfg.get_double("estimator.min_parallax_deg", c.min_parallax_deg);
  c.min_pnp_landmarks = cfg.get_int("estimator.min_pnp_landmarks", c.min_pnp_landmarks);
  c.rebias_threshold = cfg.get_double("estimator.rebias_threshold", c.rebias_threshold);
  c.bias_prior_accel = cfg.get_double("estimator.bias_prior_accel", c.bias_prior_accel);
  c.bias_prior_gyro = cfg.get_double("estimator.bias_prior_gyro", c.bias_prior_gyro);
  c.export_pixel_covariance = cfg.get_bool("estimator.export_pixel_covariance", c.export_pixel_covariance);
  cfg.get_int("estimator.seed", 0);  // accepted for bookkeeping; the estimator draws no random numbers

  UncertaintyOptions& u = c.uncertainty;
  u.lambda = cfg.get_double("uncertainty.lambda", u.lambda);
  u.sigma_floor = cfg.get_double("uncertainty.sigma_floor", u.sigma_floor);
  u.sigma_cap = cfg.get_double("uncertainty.sigma_cap", u.sigma_cap);
  u.min_obs = cfg.get_int("uncertainty.min_obs", u.min_obs);
  u.blend_n0 = cfg.get_double("uncertainty.blend_n0", u.blend_n0);
  u.pixel_sigma0 = cfg.get_double("uncertainty.pixel_sigma0", u.pixel_sigma0);
  u.prior_sigma = cfg.get_double("uncertainty.prior_sigma", u.prior_sigma);
  u.min_baseline = cfg.get_double("uncertainty.min_baseline", u.min_baseline);
  u.outer_iters = cfg.get_int("uncertainty.outer_iters", u.outer_iters);
  u.convergence_tol = cfg.get_double("uncertainty.convergence_tol", u.convergence_tol);

  ImuNoiseParams& n = c.imu_noise;
  n.gyro_noise = cfg.get_double("imu_noise.gyro_noise", n.gyro_noise);
  n.accel_noise = cfg.get_double("imu_noise.accel_noise", n.accel_noise);
  n.gyro_walk = cfg.get_double("imu_noise.gyro_walk", n.gyro_walk);
  n.accel_walk = cfg.get_double("imu_noise.accel_walk", n.accel_walk);

  c.ba_solver.max_iterations = cfg.get_int("solver.max_iterations", c.ba_solver.max_iterations);
  c.ba_solver.tolerance = cfg.get_double("solver.tolerance", c.ba_solver.tolerance);
  c.ba_solver.huber_delta = cfg.get_double("solver.huber", c.ba_solver.huber_delta);
  c.pnp_solver = c.ba_solver;
  c.pnp_solver.max_iterations = cfg.get_int("solver.pnp_max_iterations", c.pnp_solver.max_iterations);
  cfg.reject_unknown();

  require(c.window_size >= 2 && c.window_size <= 100, "window_size must lie in [2, 100]");
  require(c.keyframe_interval >= 1, "keyframe_interval must be at least 1");
  require(c.keyframe_overlap >= 0 && c.keyframe_overlap <= 1, "keyframe_overlap must lie in [0, 1]");
  require(c.min_parallax_deg >= 0 && c.min_parallax_deg < 90, "min_parallax_deg must lie in [0, 90)");
  require(c.min_pnp_landmarks >= 4, "min_pnp_landmarks must be at least 4");
  require(c.rebias_threshold > 0, "rebias_threshold must be positive");
  require(c.bias_prior_accel > 0 && c.bias_prior_gyro > 0, "bias priors must be positive");
  require(u.lambda >= 0, "lambda must be non-negative");
  require(u.sigma_floor > 0 && u.sigma_cap >= u.sigma_floor, "need 0 < sigma_floor <= sigma_cap");
  require(u.min_obs >= 1, "min_obs must be at least 1");
  require(u.blend_n0 >= 0, "blend_n0 must be non-negative");
  require(u.pixel_sigma0 > 0 && u.prior_sigma > 0, "pixel_sigma0 and prior_sigma must be positive");
  require(u.min_baseline >= 0, "min_baseline must be non-negative");
  require(u.outer_iters >= 1 && u.outer_iters <= 20, "outer_iters must lie in [1, 20]");
  require(u.convergence_tol >= 0, "convergence_tol must be non-negative");
  require(n.gyro_noise > 0 && n.accel_noise > 0 && n.gyro_walk > 0 && n.accel_walk > 0,
          "IMU noise densities must be positive");
  require(c.ba_solver.max_iterations >= 1 && c.pnp_solver.max_iterations >= 1, "max_iterations must be positive");
  require(c.ba_solver.tolerance > 0, "tolerance must be positive");
  require(c.ba_solver.huber_delta >= 0, "huber must be non-negative");
  return c;
}

EstimatorConfig load_run_config(const std::filesystem::path& file) { return parse_run_config(ConfigFile::load(file)); }

std::string run_config_text(const EstimatorConfig& c) {
  ConfigWriter w;
  w.set("estimator", "mode", std::string(to_string(c.mode.mode)));
  w.set("estimator", "window_size", std::to_string(c.window_size));
  w.set("estimator", "keyframe_interval", std::to_string(c.keyframe_interval));
  w.set("estimator", "keyframe_overlap", c.keyframe_overlap);
  w.set("estimator", "min_parallax_deg", c.min_parallax_deg);
  w.set("estimator", "min_pnp_landmarks", std::to_string(c.min_pnp_landmarks));
  w.set("estimator", "rebias_threshold", c.rebias_threshold);
  w.set("estimator", "bias_prior_accel", c.bias_prior_accel);
  w.set("estimator", "bias_prior_gyro", c.bias_prior_gyro);
  w.set("estimator", "export_pixel_covariance", c.export_pixel_covariance ? "true" : "false");
  const UncertaintyOptions& u = c.uncertainty;
  w.set("uncertainty", "lambda", u.lambda);
  w.set("uncertainty", "sigma_floor", u.sigma_floor);
  w.set("uncertainty", "sigma_cap", u.sigma_cap);
  w.set("uncertainty", "min_obs", std::to_string(u.min_obs));
  w.set("uncertainty", "blend_n0", u.blend_n0);
  w.set("uncertainty", "pixel_sigma0", u.pixel_sigma0);
  w.set("uncertainty", "prior_sigma", u.prior_sigma);
  w.set("uncertainty", "min_baseline", u.min_baseline);
  w.set("uncertainty", "outer_iters", std::to_string(u.outer_iters));
  w.set("uncertainty", "convergence_tol", u.convergence_tol);
  w.set("imu_noise", "gyro_noise", c.imu_noise.gyro_noise);
  w.set("imu_noise", "accel_noise", c.imu_noise.accel_noise);
  w.set("imu_noise", "gyro_walk", c.imu_noise.gyro_walk);
  w.set("imu_noise", "accel_walk", c.imu_noise.accel_walk);
  w.set("solver", "max_iterations", std::to_string(c.ba_solver.max_iterations));
  w.set("solver", "tolerance", c.ba_solver.tolerance);
  w.set("solver", "huber", c.ba_solver.huber_delta);
  w.set("solver", "pnp_max_iterations", std::to_string(c.pnp_solver.max_iterations));
  return w.str();
}

NavState initial_state(const Dataset& dataset, bool* from_groundtruth) {
  NavState s;
  if (from_groundtruth) *from_groundtruth = false;
  if (dataset.frames.empty()) return s;
  const double t0 = dataset.frames.front().t;
  s.t = t0;
  const GroundTruthSample* best = nullptr;
  for (const GroundTruthSample& g : dataset.groundtruth) {
    if (!best || std::abs(g.t - t0) < std::abs(best->t - t0)) best = &g;
  }
  if (best && std::abs(best->t - t0) <= 1e-3) {
    s.T_wb = best->T_wb;
    s.v_w = best->v_w;
    if (from_groundtruth) *from_groundtruth = true;
    return s;
  }
  if (!dataset.imu.empty()) {
    // At rest the accelerometer reads -R^T g; rotate it onto -g.
    const Eigen::Quaterniond q =
        Eigen::Quaterniond::FromTwoVectors(dataset.imu.front().accel, -dataset.calib.gravity.g_world);
    s.T_wb = SE3d(SO3d(q), Eigen::Vector3d::Zero());
  }
  return s;
}

RunResult run_sequence(const Dataset& dataset, const EstimatorConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  if (dataset.frames.empty()) throw Error(ErrorCode::DatasetFormatError, "dataset has no frames");

  RunResult result;
  result.sequence = dataset.name;
  result.mode = config.mode.mode;

  Estimator estimator(dataset.calib, config);
  estimator.initialize(initial_state(dataset, &result.initialized_from_groundtruth));

  DatasetReplay replay(std::shared_ptr<const Dataset>(&dataset, [](const Dataset*) {}));
  while (auto event = replay.next()) {
    if (const auto* imu = std::get_if<ImuSample>(&*event)) {
      estimator.add_imu(*imu);
    } else {
      const FrameEstimate est = estimator.process_frame(std::get<FrameObservations>(*event));
      result.dead_reckoned_frames += est.dead_reckoned ? 1 : 0;
      result.keyframes += est.keyframe ? 1 : 0;
      result.frames.push_back(est);
    }
  }
  result.stats = estimator.stats();
  result.pixel_covariances = estimator.pixel_covariances();
  result.landmarks = estimator.landmark_history();
  result.failed_window_solves = estimator.failed_window_solves();
  result.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<GroundTruthSample> trajectory_rows(const RunResult& result) {
  std::vector<GroundTruthSample> rows;
  rows.reserve(result.frames.size());
  for (const FrameEstimate& f : result.frames) rows.push_back({f.state.t, f.state.T_wb, f.state.v_w});
  return rows;
}

std::string timing_json(const RunResult& r) {
  const Instrumentation& s = r.stats;
  const double overhead =
      s.ba_total.total_ms > 0 ? (s.propagation.total_ms + s.learning.total_ms) / s.ba_total.total_ms : 0.0;
  const double tracking_hz = s.tracking.mean_ms() > 0 ? 1000.0 / s.tracking.mean_ms() : 0.0;
  const double pipeline_hz = r.wall_ms > 0 ? 1000.0 * static_cast<double>(r.frames.size()) / r.wall_ms : 0.0;
  nlohmann::json j = {
      {"mode", std::string(to_string(r.mode))},
      {"sequence", r.sequence},
      {"frames", r.frames.size()},
      {"stages",
       {{"tracking", stage_json(s.tracking)},
        {"ba_total", stage_json(s.ba_total)},
        {"solver", stage_json(s.solver)},
        {"propagation", stage_json(s.propagation)},
        {"learning", stage_json(s.learning)}}},
      {"learning_overhead_fraction", overhead},
      {"tracking_rate_hz", tracking_hz},
      {"pipeline_rate_hz", pipeline_hz},
      {"wall_ms", r.wall_ms},
  };
  return j.dump(2) + "\n";
}

void write_run_outputs(const std::filesystem::path& dir, const RunResult& r) {
  std::filesystem::create_directories(dir);
  write_pose_csv(dir / "trajectory.csv", trajectory_rows(r));
  write_file(dir / "timing.json", timing_json(r));

  std::string cov = "frame_id,landmark_id,s11,s12,s22\n";
  for (const PixelCovarianceRow& row : r.pixel_covariances) {
    cov += std::to_string(row.frame_id) + "," + std::to_string(row.landmark_id) + "," + fixed(row.sigma(0, 0), 9) +
           "," + fixed(row.sigma(0, 1), 9) + "," + fixed(row.sigma(1, 1), 9) + "\n";
  }
  write_file(dir / "uncertainty.csv", cov);

  std::string lms = "landmark_id,state,source,samples,trace,s11,s12,s13,s22,s23,s33\n";
  for (const Landmark& lm : r.landmarks) {
    const Eigen::Matrix3d& S = lm.uncertainty.sigma_world;
    lms += std::to_string(lm.id) + "," + (lm.retired ? "retired," : "active,") +
           std::string(to_string(lm.uncertainty.source)) + "," +
           std::to_string(lm.uncertainty.sample_count) + "," + fixed(S.trace(), 12) + "," + fixed(S(0, 0), 12) + "," +
           fixed(S(0, 1), 12) + "," + fixed(S(0, 2), 12) + "," + fixed(S(1, 1), 12) + "," + fixed(S(1, 2), 12) + "," +
           fixed(S(2, 2), 12) + "\n";
  }
  write_file(dir / "landmark_uncertainty.csv", lms);

  nlohmann::json info = {
      {"mode", std::string(to_string(r.mode))},
      {"sequence", r.sequence},
      {"dataset", r.dataset_path},
      {"frames", r.frames.size()},
      {"keyframes", r.keyframes},
      {"dead_reckoned_frames", r.dead_reckoned_frames},
      {"failed_window_solves", r.failed_window_solves},
      {"learn_calls", r.stats.learn_calls},
      {"initialized_from_groundtruth", r.initialized_from_groundtruth},
  };
  nlohmann::json flagged = nlohmann::json::array();
  for (const FrameEstimate& f : r.frames) {
    if (f.dead_reckoned) flagged.push_back(f.frame_id);
  }
  info["dead_reckoned_frame_ids"] = flagged;
  write_file(dir / "run_info.json", info.dump(2) + "\n");
}

}  // namespace vio
