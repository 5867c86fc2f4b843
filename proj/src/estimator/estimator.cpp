#include "vio/estimator/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include <Eigen/Cholesky>

#include "vio/common/error.hpp"

namespace vio {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

class ScopedTimer {
 public:
  explicit ScopedTimer(StageStats* stats) : stats_(stats), start_(Clock::now()) {}
  ~ScopedTimer() {
    if (stats_) stats_->add(elapsed_ms(start_));
  }

 private:
  StageStats* stats_;
  Clock::time_point start_;
};

// Reprojection of a fixed landmark; the pose is the only variable.
class PoseOnlyCost final : public CostFunction {
 public:
  PoseOnlyCost(const PinholeCamerad& cam, const Eigen::Vector2d& z, const Eigen::Vector3d& p_world)
      : cam_(cam), z_(z), p_world_(p_world) {}
  int residual_dim() const override { return 2; }
  void evaluate(std::span<const Variable* const> vars, Eigen::VectorXd& r,
                std::vector<Eigen::MatrixXd>* J) const override {
    const auto res = reprojection_residual_and_jacobians(cam_, vars[0]->pose, p_world_, z_);
    r = res.residual;
    if (J) (*J)[0] = res.J_pose;
  }

 private:
  const PinholeCamerad& cam_;
  Eigen::Vector2d z_;
  Eigen::Vector3d p_world_;
};

class ReprojectionCost final : public CostFunction {
 public:
  ReprojectionCost(const PinholeCamerad& cam, const Eigen::Vector2d& z) : cam_(cam), z_(z) {}
  int residual_dim() const override { return 2; }
  void evaluate(std::span<const Variable* const> vars, Eigen::VectorXd& r,
                std::vector<Eigen::MatrixXd>* J) const override {
    const Eigen::Vector3d p_world = vars[1]->value;
    const auto res = reprojection_residual_and_jacobians(cam_, vars[0]->pose, p_world, z_);
    r = res.residual;
    if (J) {
      (*J)[0] = res.J_pose;
      (*J)[1] = res.J_point;
    }
  }

 private:
  const PinholeCamerad& cam_;
  Eigen::Vector2d z_;
};

NavState nav_state(const Variable& pose, const Variable& velocity, const Variable& bias) {
  NavState s;
  s.T_wb = pose.pose;
  s.v_w = velocity.value;
  s.bias.accel = bias.value.head<3>();
  s.bias.gyro = bias.value.tail<3>();
  return s;
}

// Variables: pose_i, v_i, bias_i, pose_j, v_j, bias_j.
class ImuCost final : public CostFunction {
 public:
  ImuCost(const PreintegratedImu& pre, const GravityModel& gravity) : pre_(pre), gravity_(gravity) {}
  int residual_dim() const override { return 9; }
  void evaluate(std::span<const Variable* const> vars, Eigen::VectorXd& r,
                std::vector<Eigen::MatrixXd>* J) const override {
    const NavState si = nav_state(*vars[0], *vars[1], *vars[2]);
    const NavState sj = nav_state(*vars[3], *vars[4], *vars[5]);
    if (!J) {
      r = imu_residual(si, sj, pre_, gravity_);
      return;
    }
    const ImuResidualJacobians res = imu_residual_jacobians(si, sj, pre_, gravity_);
    r = res.residual;
    (*J)[0] = res.d_state_i.leftCols<6>();
    (*J)[1] = res.d_state_i.middleCols<3>(6);
    (*J)[2] = res.d_state_i.rightCols<6>();
    (*J)[3] = res.d_state_j.leftCols<6>();
    (*J)[4] = res.d_state_j.middleCols<3>(6);
    (*J)[5] = res.d_state_j.rightCols<6>();
  }

 private:
  const PreintegratedImu& pre_;
  const GravityModel& gravity_;
};

// b_j - b_i
class BiasWalkCost final : public CostFunction {
 public:
  int residual_dim() const override { return 6; }
  void evaluate(std::span<const Variable* const> vars, Eigen::VectorXd& r,
                std::vector<Eigen::MatrixXd>* J) const override {
    r = vars[1]->value - vars[0]->value;
    if (J) {
      (*J)[0] = -Eigen::MatrixXd::Identity(6, 6);
      (*J)[1] = Eigen::MatrixXd::Identity(6, 6);
    }
  }
};

class BiasPriorCost final : public CostFunction {
 public:
  explicit BiasPriorCost(const Eigen::Matrix<double, 6, 1>& mean) : mean_(mean) {}
  int residual_dim() const override { return 6; }
  void evaluate(std::span<const Variable* const> vars, Eigen::VectorXd& r,
                std::vector<Eigen::MatrixXd>* J) const override {
    r = vars[0]->value - mean_;
    if (J) (*J)[0] = Eigen::MatrixXd::Identity(6, 6);
  }

 private:
  Eigen::Matrix<double, 6, 1> mean_;
};

Eigen::MatrixXd information_from_covariance(const Eigen::MatrixXd& covariance) {
  const Eigen::MatrixXd sym = 0.5 * (covariance + covariance.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd info = llt.solve(Eigen::MatrixXd::Identity(sym.rows(), sym.cols()));
    return 0.5 * (info + info.transpose());
  }
  const double eps = 1e-12 + 1e-9 * sym.diagonal().cwiseAbs().maxCoeff();
  Eigen::MatrixXd info = (sym + eps * Eigen::MatrixXd::Identity(sym.rows(), sym.cols())).inverse();
  return 0.5 * (info + info.transpose());
}

bool in_front(const PinholeCamerad& cam, const SE3d& T_wb, const Eigen::Vector3d& p_world) {
  return (camera_from_world(cam, T_wb) * p_world).z() > cam.z_min;
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Baseline: return "baseline";
    case Mode::Phase1: return "phase1";
    case Mode::Phase2: return "phase2";
  }
  return "baseline";
}

Mode parse_mode(std::string_view text) {
  if (text == "baseline") return Mode::Baseline;
  if (text == "phase1") return Mode::Phase1;
  if (text == "phase2") return Mode::Phase2;
  throw Error(ErrorCode::ConfigError, "unknown mode '" + std::string(text) + "' (expected baseline, phase1 or phase2)");
}

void StageStats::add(double ms) {
  ++count;
  total_ms += ms;
  max_ms = std::max(max_ms, ms);
}

Eigen::Matrix2d observation_information(const PinholeCamerad& cam, const SE3d& T_wb, const Landmark& landmark,
                                        const ModeConfig& mode, const UncertaintyOptions& options,
                                        Eigen::Matrix2d* sigma_pixel) {
  if (!mode.adaptive()) return Eigen::Matrix2d::Identity();
  const Eigen::Matrix2d sigma =
      propagate_to_pixel(cam, camera_from_world(cam, T_wb), landmark.position, landmark.uncertainty.sigma_world);
  if (sigma_pixel) *sigma_pixel = sigma;
  return adaptive_information(sigma, options.lambda).omega;
}

TrackResult track_frame(const PinholeCamerad& cam, const FrameObservations& frame, const SE3d& seed,
                        const std::map<int, Landmark>& landmarks, const EstimatorConfig& config) {
  TrackResult result;
  Problem problem;
  const VariableId pose = problem.add_pose(seed);
  for (const FeatureObservation& f : frame.features) {
    const auto it = landmarks.find(f.landmark_id);
    if (it == landmarks.end() || !it->second.initialized) continue;
    const Landmark& lm = it->second;
    if (!in_front(cam, seed, lm.position)) continue;
    Eigen::Matrix2d sigma;
    const Eigen::Matrix2d omega = observation_information(cam, seed, lm, config.mode, config.uncertainty, &sigma);
    if (config.mode.adaptive() && config.export_pixel_covariance) {
      result.pixel_covariances.push_back({frame.frame_id, lm.id, sigma});
    }
    problem.add_residual(std::make_shared<PoseOnlyCost>(cam, f.uv, lm.position), {pose}, omega, true);
    ++result.landmarks_used;
  }
  if (result.landmarks_used < std::max(config.min_pnp_landmarks, 4)) {
    throw Error(ErrorCode::InsufficientLandmarks,
                "frame " + std::to_string(frame.frame_id) + " sees " + std::to_string(result.landmarks_used) +
                    " initialized landmarks");
  }
  result.report = solve(problem, config.pnp_solver);
  result.T_wb = problem.variable(pose).pose;
  return result;
}

std::optional<Eigen::Vector3d> triangulate_midpoint(const PinholeCamerad& cam, const SE3d& T_wb_a,
                                                    const Eigen::Vector2d& p_norm_a, const SE3d& T_wb_b,
                                                    const Eigen::Vector2d& p_norm_b, double min_parallax_deg) {
  const SE3d T_wc_a = T_wb_a * cam.T_cb.inverse();
  const SE3d T_wc_b = T_wb_b * cam.T_cb.inverse();
  const Eigen::Vector3d da = (T_wc_a.rotation() * Eigen::Vector3d(p_norm_a.x(), p_norm_a.y(), 1.0)).normalized();
  const Eigen::Vector3d db = (T_wc_b.rotation() * Eigen::Vector3d(p_norm_b.x(), p_norm_b.y(), 1.0)).normalized();
  const double cos_parallax = std::clamp(da.dot(db), -1.0, 1.0);
  if (std::acos(cos_parallax) < min_parallax_deg * M_PI / 180.0) return std::nullopt;

  const Eigen::Vector3d w = T_wc_a.translation() - T_wc_b.translation();
  const double b = cos_parallax;
  const double denom = 1.0 - b * b;
  if (denom < 1e-12) return std::nullopt;
  const double d = da.dot(w), e = db.dot(w);
  const double s = (b * e - d) / denom;
  const double t = (e - b * d) / denom;
  const Eigen::Vector3d p = 0.5 * (T_wc_a.translation() + s * da + T_wc_b.translation() + t * db);
  if (!in_front(cam, T_wb_a, p) || !in_front(cam, T_wb_b, p)) return std::nullopt;
  return p;
}

int initialize_landmarks(SlidingWindow& window, const PinholeCamerad& cam, const EstimatorConfig& config) {
  int count = 0;
  const auto& keyframes = window.keyframes();
  for (auto& [id, lm] : window.landmarks()) {
    if (lm.initialized || lm.observations.size() < 2) continue;
    const auto& [first_id, first] = *lm.observations.begin();
    const auto& [last_id, last] = *lm.observations.rbegin();
    const int ia = window.index_of(first_id), ib = window.index_of(last_id);
    if (ia < 0 || ib < 0) continue;
    const SE3d& Ta = keyframes[ia].state.T_wb;
    const SE3d& Tb = keyframes[ib].state.T_wb;
    const auto p = triangulate_midpoint(cam, Ta, first.p_norm, Tb, last.p_norm, config.min_parallax_deg);
    if (!p) continue;
    lm.initialized = true;
    lm.position = *p;
    lm.uncertainty = LandmarkUncertainty{};
    lm.uncertainty.sigma_world =
        Eigen::Matrix3d::Identity() * config.uncertainty.prior_sigma * config.uncertainty.prior_sigma;
    if (config.mode.adaptive()) {
      try {
        lm.uncertainty = geometric_prior(cam, Ta, Tb, lm.position, config.uncertainty);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateBaseline && e.code() != ErrorCode::BehindCamera) throw;
      }
    }
    ++count;
  }
  return count;
}

WindowOptimization optimize_window(SlidingWindow& window, const Calibration& calib, const EstimatorConfig& config,
                                   const WindowOptions& options, Instrumentation* stats) {
  ScopedTimer total_timer(stats ? &stats->ba_total : nullptr);
  const PinholeCamerad& cam = calib.camera;
  auto& keyframes = window.keyframes();
  const int n = static_cast<int>(keyframes.size());
  if (n < 2) throw Error(ErrorCode::InsufficientLandmarks, "window optimization needs two keyframes");

  if (options.use_imu) {
    const int refreshed = window.refresh_preintegration(config.imu_noise, config.rebias_threshold);
    if (stats) stats->preintegration_refreshes += refreshed;
  }

  Problem problem;
  std::vector<VariableId> pose_ids, vel_ids, bias_ids;
  for (int i = 0; i < n; ++i) {
    pose_ids.push_back(problem.add_pose(keyframes[i].state.T_wb, options.fix_gauge && i == 0));
    if (options.use_imu) {
      vel_ids.push_back(problem.add_vector(keyframes[i].state.v_w));
      bias_ids.push_back(problem.add_vector(keyframes[i].state.bias.vector()));
    }
  }

  struct VisualEntry {
    ResidualId residual;
    int keyframe;
    int landmark;
    Eigen::Vector2d p_norm;
  };
  std::vector<VisualEntry> visual;
  std::map<int, VariableId> landmark_vars;
  std::map<int, LandmarkUncertainty> staged;

  WindowOptimization out;
  for (auto& [id, lm] : window.landmarks()) {
    if (!lm.initialized) continue;
    std::vector<std::pair<int, const FeatureObservation*>> usable;
    for (const auto& [frame_id, obs] : lm.observations) {
      const int k = window.index_of(frame_id);
      if (k >= 0 && in_front(cam, keyframes[k].state.T_wb, lm.position)) usable.emplace_back(k, &obs);
    }
    if (usable.size() < 2) continue;
    const VariableId var = problem.add_vector(lm.position, true);
    landmark_vars[id] = var;
    staged[id] = lm.uncertainty;
    if (config.mode.adaptive() && !config.mode.learns()) {
      // Fixed geometric model, re-linearized over the widest pair of views in the window.
      try {
        staged[id] = geometric_prior(cam, keyframes[usable.front().first].state.T_wb,
                                     keyframes[usable.back().first].state.T_wb, lm.position, config.uncertainty);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateBaseline && e.code() != ErrorCode::BehindCamera) throw;
      }
    }
    for (const auto& [k, obs] : usable) {
      const ResidualId r = problem.add_residual(std::make_shared<ReprojectionCost>(cam, obs->uv),
                                                {pose_ids[k], var}, Eigen::Matrix2d::Identity(), true);
      visual.push_back({r, k, id, obs->p_norm});
    }
  }
  out.landmarks = static_cast<int>(landmark_vars.size());
  out.observations = static_cast<int>(visual.size());

  if (options.use_imu) {
    const auto& segments = window.segments();
    for (int k = 0; k + 1 < n; ++k) {
      const PreintegratedImu& pre = segments[k].pre;
      problem.add_residual(std::make_shared<ImuCost>(pre, calib.gravity),
                           {pose_ids[k], vel_ids[k], bias_ids[k], pose_ids[k + 1], vel_ids[k + 1], bias_ids[k + 1]},
                           information_from_covariance(pre.covariance));
      problem.add_residual(std::make_shared<BiasWalkCost>(), {bias_ids[k], bias_ids[k + 1]},
                           bias_walk_information(config.imu_noise, pre.dt_total));
    }
    Eigen::Matrix<double, 6, 1> prior_info;
    prior_info << Eigen::Vector3d::Constant(1.0 / (config.bias_prior_accel * config.bias_prior_accel)),
        Eigen::Vector3d::Constant(1.0 / (config.bias_prior_gyro * config.bias_prior_gyro));
    problem.add_residual(std::make_shared<BiasPriorCost>(window.anchor_bias().vector()), {bias_ids[0]},
                         Eigen::MatrixXd(prior_info.asDiagonal()));
  }

  const UncertaintyOptions& uopts = config.uncertainty;

  auto forward = [&] {
    ScopedTimer timer(stats ? &stats->propagation : nullptr);
    if (stats) ++stats->forward_passes;
    for (const VisualEntry& e : visual) {
      Landmark view;
      view.position = problem.variable(landmark_vars.at(e.landmark)).value;
      view.uncertainty = staged.at(e.landmark);
      const SE3d& T_wb = problem.variable(pose_ids[e.keyframe]).pose;
      problem.set_information(e.residual, observation_information(cam, T_wb, view, config.mode, uopts));
    }
  };

  auto optimize = [&] {
    ScopedTimer timer(stats ? &stats->solver : nullptr);
    if (stats) ++stats->ba_solves;
    return solve(problem, config.ba_solver);
  };

  auto backward = [&] {
    ScopedTimer timer(stats ? &stats->learning : nullptr);
    if (stats) ++stats->learn_calls;
    std::vector<int> ids;
    std::vector<LearningInput> inputs;
    std::map<int, std::size_t> slot;
    for (const VisualEntry& e : visual) {
      auto [it, inserted] = slot.try_emplace(e.landmark, inputs.size());
      if (inserted) {
        ids.push_back(e.landmark);
        inputs.push_back({problem.variable(landmark_vars.at(e.landmark)).value, {}, staged.at(e.landmark)});
      }
      inputs[it->second].observations.push_back({problem.variable(pose_ids[e.keyframe]).pose, e.p_norm});
    }
    const std::vector<LandmarkUncertainty> learned = learn_from_ba(cam, inputs, uopts);
    double max_change = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const double before = staged.at(ids[i]).sigma_world.trace();
      const double after = learned[i].sigma_world.trace();
      max_change = std::max(max_change, std::abs(after - before) / std::max(before, 1e-300));
      staged[ids[i]] = learned[i];
    }
    return max_change;
  };

  if (config.mode.learns()) {
    out.refinement = refine_iteratively({forward, optimize, backward}, uopts.outer_iters, uopts.convergence_tol);
    out.report = out.refinement.solves.back();
  } else {
    if (config.mode.adaptive()) forward();
    out.report = optimize();
  }

  for (int i = 0; i < n; ++i) {
    keyframes[i].state.T_wb = problem.variable(pose_ids[i]).pose;
    if (options.use_imu) {
      keyframes[i].state.v_w = problem.variable(vel_ids[i]).value;
      const Eigen::VectorXd& b = problem.variable(bias_ids[i]).value;
      keyframes[i].state.bias.accel = b.head<3>();
      keyframes[i].state.bias.gyro = b.tail<3>();
    }
  }
  for (const auto& [id, var] : landmark_vars) {
    Landmark& lm = window.landmarks().at(id);
    lm.position = problem.variable(var).value;
    lm.uncertainty = staged.at(id);
  }
  return out;
}

Estimator::Estimator(Calibration calib, EstimatorConfig config)
    : calib_(std::move(calib)), config_(std::move(config)), window_(config_.window_size) {}

void Estimator::initialize(const NavState& state) {
  current_ = state;
  initialized_ = true;
}

void Estimator::add_imu(const ImuSample& sample) {
  if (!imu_.empty() && !(sample.t > imu_.back().t)) {
    throw Error(ErrorCode::NonMonotonicTime, "IMU samples must arrive in increasing time order");
  }
  imu_.push_back(sample);
}

std::vector<ImuSample> Estimator::imu_between(double t0, double t1) const {
  auto sample_at = [&](double t) {
    const auto it = std::lower_bound(imu_.begin(), imu_.end(), t,
                                     [](const ImuSample& s, double value) { return s.t < value; });
    ImuSample s;
    if (it == imu_.end()) {
      s = imu_.back();
    } else if (it->t == t || it == imu_.begin()) {
      s = *it;
    } else {
      const ImuSample& a = *(it - 1);
      const ImuSample& b = *it;
      const double u = (t - a.t) / (b.t - a.t);
      s.omega = (1 - u) * a.omega + u * b.omega;
      s.accel = (1 - u) * a.accel + u * b.accel;
    }
    s.t = t;
    return s;
  };

  std::vector<ImuSample> out;
  if (imu_.empty() || !(t1 > t0)) return out;
  out.push_back(sample_at(t0));
  auto it = std::upper_bound(imu_.begin(), imu_.end(), t0, [](double value, const ImuSample& s) { return value < s.t; });
  for (; it != imu_.end() && it->t < t1; ++it) out.push_back(*it);
  out.push_back(sample_at(t1));
  return out;
}

bool Estimator::is_keyframe(const FrameObservations& frame) const {
  if (frames_since_keyframe_ >= config_.keyframe_interval) return true;
  const Keyframe& last = window_.keyframes().back();
  if (last.features.empty()) return false;
  std::set<int> seen;
  for (const FeatureObservation& f : last.features) seen.insert(f.landmark_id);
  int shared = 0;
  for (const FeatureObservation& f : frame.features) shared += static_cast<int>(seen.count(f.landmark_id));
  return static_cast<double>(shared) < config_.keyframe_overlap * static_cast<double>(last.features.size());
}

FrameEstimate Estimator::process_frame(const FrameObservations& frame) {
  if (!initialized_) throw Error(ErrorCode::NumericalFailure, "estimator used before initialize()");
  FrameEstimate est;
  est.frame_id = frame.frame_id;

  if (!has_frame_) {
    has_frame_ = true;
    current_.t = frame.t;
    window_.insert_keyframe(current_, frame.frame_id, frame.features, {}, config_.imu_noise);
    frames_since_keyframe_ = 0;
    est.state = current_;
    est.keyframe = true;
    return est;
  }
  if (!(frame.t > current_.t)) {
    throw Error(ErrorCode::NonMonotonicTime, "frame " + std::to_string(frame.frame_id) + " is not after the previous one");
  }

  NavState predicted = current_;
  const std::vector<ImuSample> segment = imu_between(current_.t, frame.t);
  if (segment.size() >= 2) {
    predicted = predict_state(current_, preintegrate(segment, current_.bias, config_.imu_noise), calib_.gravity);
  }
  predicted.bias = current_.bias;
  predicted.t = frame.t;

  {
    ScopedTimer timer(&stats_.tracking);
    try {
      TrackResult tracked = track_frame(calib_.camera, frame, predicted.T_wb, window_.landmarks(), config_);
      predicted.T_wb = tracked.T_wb;
      pixel_covariances_.insert(pixel_covariances_.end(), tracked.pixel_covariances.begin(),
                                tracked.pixel_covariances.end());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientLandmarks && e.code() != ErrorCode::SingularNormalEquations &&
          e.code() != ErrorCode::NumericalFailure) {
        throw;
      }
      est.dead_reckoned = true;
    }
  }
  current_ = predicted;
  ++frames_since_keyframe_;

  if (is_keyframe(frame)) {
    est.keyframe = true;
    std::vector<ImuSample> imu = imu_between(window_.keyframes().back().state.t, frame.t);
    SlidingWindow::InsertResult inserted =
        window_.insert_keyframe(current_, frame.frame_id, frame.features, std::move(imu), config_.imu_noise);
    for (Landmark& lm : inserted.removed) {
      if (lm.initialized) {
        lm.retired = true;
        retired_.push_back(std::move(lm));
      }
    }
    initialize_landmarks(window_, calib_.camera, config_);
    try {
      optimize_window(window_, calib_, config_, {}, &stats_);
      current_ = window_.keyframes().back().state;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularNormalEquations && e.code() != ErrorCode::NumericalFailure &&
          e.code() != ErrorCode::AngleNearPi && e.code() != ErrorCode::BehindCamera) {
        throw;
      }
      ++failed_solves_;
    }
    frames_since_keyframe_ = 0;
  }
  est.state = current_;
  return est;
}

std::vector<Landmark> Estimator::landmark_history() const {
  std::vector<Landmark> out = retired_;
  for (const auto& [id, lm] : window_.landmarks()) {
    if (lm.initialized) out.push_back(lm);
  }
  return out;
}

}  // namespace vio
