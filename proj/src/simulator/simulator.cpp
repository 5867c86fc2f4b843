#include "vio/simulator/simulator.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "vio/common/csv.hpp"
#include "vio/common/error.hpp"

namespace vio {
namespace {

std::string vec_text(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? " " : "") + format_double(v(i));
  return out;
}

Eigen::VectorXd pose_vector(const SE3d& T) {
  const Eigen::Quaterniond q = T.rotation().quaternion();
  Eigen::VectorXd v(7);
  v << T.translation(), q.w(), q.x(), q.y(), q.z();
  return v;
}

SE3d pose_from_vector(const Eigen::VectorXd& v) {
  return SE3d(SO3d(Eigen::Quaterniond(v(3), v(4), v(5), v(6)).normalized()), v.head<3>());
}

std::string_view kind_name(TrajectoryModel::Kind k) {
  switch (k) {
    case TrajectoryModel::Kind::Circle: return "circle";
    case TrajectoryModel::Kind::Lissajous: return "lissajous";
    case TrajectoryModel::Kind::RandomSpline: return "random-spline";
  }
  return "circle";
}

// Camera looking along body +x, image x along body -y, image y along body -z.
SE3d default_T_cb() {
  Eigen::Matrix3d R_cb;
  R_cb << 0, -1, 0,
          0, 0, -1,
          1, 0, 0;
  return SE3d(SO3d(R_cb), Eigen::Vector3d::Zero());
}

std::vector<TrueLandmark> make_landmarks(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  const LandmarkSpec& spec = cfg.landmarks;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<TrueLandmark> out;
  const Eigen::Vector3d size = spec.box_max - spec.box_min;
  for (int id = 0; id < spec.count; ++id) {
    Eigen::Vector3d p;
    if (spec.layout == LandmarkLayout::Volume) {
      p = spec.box_min + size.cwiseProduct(Eigen::Vector3d(unit(rng), unit(rng), unit(rng)));
    } else {
      // Pick a side wall with probability proportional to its length.
      const double perimeter = 2 * (size.x() + size.y());
      double s = unit(rng) * perimeter;
      const double z = spec.box_min.z() + unit(rng) * size.z();
      if (s < size.x()) {
        p = Eigen::Vector3d(spec.box_min.x() + s, spec.box_min.y(), z);
      } else if ((s -= size.x()) < size.y()) {
        p = Eigen::Vector3d(spec.box_max.x(), spec.box_min.y() + s, z);
      } else if ((s -= size.y()) < size.x()) {
        p = Eigen::Vector3d(spec.box_max.x() - s, spec.box_max.y(), z);
      } else {
        s -= size.x();
        p = Eigen::Vector3d(spec.box_min.x(), spec.box_max.y() - s, z);
      }
    }
    out.push_back({id, p, 0.0});
  }

  const PixelNoiseSpec& noise = cfg.pixel_noise;
  for (TrueLandmark& lm : out) {
    switch (noise.model) {
      case PixelNoiseModel::None: lm.sigma_px = 0; break;
      case PixelNoiseModel::Uniform: lm.sigma_px = noise.sigma; break;
      case PixelNoiseModel::TwoGroup:
        lm.sigma_px = unit(rng) < noise.noisy_fraction ? noise.sigma_noisy : noise.sigma_clean;
        break;
      case PixelNoiseModel::LogUniform:
        lm.sigma_px = std::exp(std::log(noise.sigma_min) +
                               unit(rng) * (std::log(noise.sigma_max) - std::log(noise.sigma_min)));
        break;
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(PixelNoiseModel m) {
  switch (m) {
    case PixelNoiseModel::None: return "none";
    case PixelNoiseModel::Uniform: return "uniform";
    case PixelNoiseModel::TwoGroup: return "two-group";
    case PixelNoiseModel::LogUniform: return "log-uniform";
  }
  return "none";
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
  if (!(duration > 0)) fail("duration must be positive");
  if (imu_rate <= 0 || cam_rate <= 0) fail("rates must be positive");
  if (imu_rate % cam_rate != 0) fail("imu_rate must be a multiple of cam_rate");
  if (landmarks.count < 0) fail("landmark count must be non-negative");
  if (!(landmarks.box_max.array() > landmarks.box_min.array()).all()) fail("landmark box is empty");
  if (!(landmarks.max_range > 0)) fail("max_range must be positive");
  if (!calib.camera.valid()) fail("camera intrinsics must be positive");
  const PixelNoiseSpec& p = pixel_noise;
  if (!(p.noisy_fraction >= 0 && p.noisy_fraction <= 1)) fail("noisy_fraction must lie in [0, 1]");
  if (p.sigma < 0 || p.sigma_clean < 0 || p.sigma_noisy < 0) fail("pixel sigmas must be non-negative");
  if (p.model == PixelNoiseModel::LogUniform && !(p.sigma_min > 0 && p.sigma_max >= p.sigma_min)) {
    fail("log-uniform range must satisfy 0 < sigma_min <= sigma_max");
  }
  if (imu_noise.gyro_noise < 0 || imu_noise.accel_noise < 0 || imu_noise.gyro_walk < 0 || imu_noise.accel_walk < 0) {
    fail("IMU noise densities must be non-negative");
  }
}

TrajectoryModel ScenarioConfig::make_trajectory() const {
  switch (trajectory) {
    case TrajectoryModel::Kind::Circle: return TrajectoryModel::circle(circle);
    case TrajectoryModel::Kind::Lissajous: return TrajectoryModel::lissajous(lissajous);
    case TrajectoryModel::Kind::RandomSpline: return TrajectoryModel::random_spline(spline, duration + 1.0, seed);
  }
  return TrajectoryModel::circle(circle);
}

ScenarioConfig parse_scenario(const ConfigFile& cfg) {
  ScenarioConfig s;
  s.name = cfg.get_string("scenario.name", s.name);
  const double seed = cfg.get_double("scenario.seed", 1);
  if (seed < 0 || seed != std::floor(seed)) throw Error(ErrorCode::ConfigError, "seed must be a non-negative integer");
  s.seed = static_cast<std::uint64_t>(seed);
  s.duration = cfg.get_double("scenario.duration", s.duration);
  s.imu_rate = cfg.get_int("scenario.imu_rate", s.imu_rate);
  s.cam_rate = cfg.get_int("scenario.cam_rate", s.cam_rate);

  const std::string kind = cfg.get_string("trajectory.kind", "circle");
  if (kind == "circle") {
    auto& c = s.circle;
    s.trajectory = TrajectoryModel::Kind::Circle;
    c.center = cfg.get_vector("trajectory.center", 3, c.center);
    c.radius = cfg.get_double("trajectory.radius", c.radius);
    c.angular_rate = cfg.get_double("trajectory.angular_rate", c.angular_rate);
    c.vertical_amplitude = cfg.get_double("trajectory.vertical_amplitude", c.vertical_amplitude);
    c.vertical_rate = cfg.get_double("trajectory.vertical_rate", c.vertical_rate);
    c.pitch_amplitude = cfg.get_double("trajectory.pitch_amplitude", c.pitch_amplitude);
    c.roll_amplitude = cfg.get_double("trajectory.roll_amplitude", c.roll_amplitude);
    c.yaw_offset = cfg.get_double("trajectory.yaw_offset", c.yaw_offset);
  } else if (kind == "lissajous") {
    auto& l = s.lissajous;
    s.trajectory = TrajectoryModel::Kind::Lissajous;
    l.center = cfg.get_vector("trajectory.center", 3, l.center);
    l.amplitude = cfg.get_vector("trajectory.amplitude", 3, l.amplitude);
    l.frequency = cfg.get_vector("trajectory.frequency", 3, l.frequency);
    l.yaw_rate = cfg.get_double("trajectory.yaw_rate", l.yaw_rate);
    l.pitch_amplitude = cfg.get_double("trajectory.pitch_amplitude", l.pitch_amplitude);
    l.roll_amplitude = cfg.get_double("trajectory.roll_amplitude", l.roll_amplitude);
  } else if (kind == "random-spline") {
    auto& p = s.spline;
    s.trajectory = TrajectoryModel::Kind::RandomSpline;
    p.box_min = cfg.get_vector("trajectory.box_min", 3, p.box_min);
    p.box_max = cfg.get_vector("trajectory.box_max", 3, p.box_max);
    p.knot_spacing = cfg.get_double("trajectory.knot_spacing", p.knot_spacing);
    p.yaw_step = cfg.get_double("trajectory.yaw_step", p.yaw_step);
    p.tilt_amplitude = cfg.get_double("trajectory.tilt_amplitude", p.tilt_amplitude);
    if (!(p.knot_spacing > 0)) throw Error(ErrorCode::ConfigError, "knot_spacing must be positive");
  } else {
    throw Error(ErrorCode::ConfigError, "unknown trajectory kind '" + kind + "'");
  }

  LandmarkSpec& lm = s.landmarks;
  lm.count = cfg.get_int("landmarks.count", lm.count);
  const std::string layout = cfg.get_string("landmarks.layout", "walls");
  if (layout == "walls") {
    lm.layout = LandmarkLayout::Walls;
  } else if (layout == "volume") {
    lm.layout = LandmarkLayout::Volume;
  } else {
    throw Error(ErrorCode::ConfigError, "unknown landmark layout '" + layout + "'");
  }
  lm.box_min = cfg.get_vector("landmarks.box_min", 3, lm.box_min);
  lm.box_max = cfg.get_vector("landmarks.box_max", 3, lm.box_max);
  lm.max_range = cfg.get_double("landmarks.max_range", lm.max_range);
  lm.min_depth = cfg.get_double("landmarks.min_depth", lm.min_depth);

  PinholeCamerad& cam = s.calib.camera;
  cam.fx = cfg.get_double("camera.fx", 458.654);
  cam.fy = cfg.get_double("camera.fy", 457.296);
  cam.cx = cfg.get_double("camera.cx", 367.215);
  cam.cy = cfg.get_double("camera.cy", 248.375);
  cam.width = cfg.get_int("camera.width", 752);
  cam.height = cfg.get_int("camera.height", 480);
  cam.T_cb = pose_from_vector(cfg.get_vector("camera.T_cb", 7, pose_vector(default_T_cb())));

  ImuNoiseParams& n = s.imu_noise;
  n.gyro_noise = cfg.get_double("imu.gyro_noise", n.gyro_noise);
  n.accel_noise = cfg.get_double("imu.accel_noise", n.accel_noise);
  n.gyro_walk = cfg.get_double("imu.gyro_walk", n.gyro_walk);
  n.accel_walk = cfg.get_double("imu.accel_walk", n.accel_walk);
  s.initial_bias.gyro = cfg.get_vector("imu.gyro_bias", 3, s.initial_bias.gyro);
  s.initial_bias.accel = cfg.get_vector("imu.accel_bias", 3, s.initial_bias.accel);
  s.calib.gravity.g_world = cfg.get_vector("imu.gravity", 3, s.calib.gravity.g_world);

  PixelNoiseSpec& p = s.pixel_noise;
  const std::string model = cfg.get_string("pixel_noise.model", "two-group");
  if (model == "none") {
    p.model = PixelNoiseModel::None;
  } else if (model == "uniform") {
    p.model = PixelNoiseModel::Uniform;
    p.sigma = cfg.get_double("pixel_noise.sigma", p.sigma);
  } else if (model == "two-group") {
    p.model = PixelNoiseModel::TwoGroup;
    p.sigma_clean = cfg.get_double("pixel_noise.sigma_clean", p.sigma_clean);
    p.sigma_noisy = cfg.get_double("pixel_noise.sigma_noisy", p.sigma_noisy);
    p.noisy_fraction = cfg.get_double("pixel_noise.noisy_fraction", p.noisy_fraction);
  } else if (model == "log-uniform") {
    p.model = PixelNoiseModel::LogUniform;
    p.sigma_min = cfg.get_double("pixel_noise.sigma_min", p.sigma_min);
    p.sigma_max = cfg.get_double("pixel_noise.sigma_max", p.sigma_max);
  } else {
    throw Error(ErrorCode::ConfigError, "unknown pixel noise model '" + model + "'");
  }

  cfg.reject_unknown();
  s.validate();
  return s;
}

ScenarioConfig load_scenario(const std::filesystem::path& file) { return parse_scenario(ConfigFile::load(file)); }

std::string scenario_text(const ScenarioConfig& s) {
  ConfigWriter w;
  w.set("scenario", "name", s.name);
  w.set("scenario", "seed", std::to_string(s.seed));
  w.set("scenario", "duration", s.duration);
  w.set("scenario", "imu_rate", std::to_string(s.imu_rate));
  w.set("scenario", "cam_rate", std::to_string(s.cam_rate));

  w.set("trajectory", "kind", std::string(kind_name(s.trajectory)));
  switch (s.trajectory) {
    case TrajectoryModel::Kind::Circle:
      w.set("trajectory", "center", vec_text(s.circle.center));
      w.set("trajectory", "radius", s.circle.radius);
      w.set("trajectory", "angular_rate", s.circle.angular_rate);
      w.set("trajectory", "vertical_amplitude", s.circle.vertical_amplitude);
      w.set("trajectory", "vertical_rate", s.circle.vertical_rate);
      w.set("trajectory", "pitch_amplitude", s.circle.pitch_amplitude);
      w.set("trajectory", "roll_amplitude", s.circle.roll_amplitude);
      w.set("trajectory", "yaw_offset", s.circle.yaw_offset);
      break;
    case TrajectoryModel::Kind::Lissajous:
      w.set("trajectory", "center", vec_text(s.lissajous.center));
      w.set("trajectory", "amplitude", vec_text(s.lissajous.amplitude));
      w.set("trajectory", "frequency", vec_text(s.lissajous.frequency));
      w.set("trajectory", "yaw_rate", s.lissajous.yaw_rate);
      w.set("trajectory", "pitch_amplitude", s.lissajous.pitch_amplitude);
      w.set("trajectory", "roll_amplitude", s.lissajous.roll_amplitude);
      break;
    case TrajectoryModel::Kind::RandomSpline:
      w.set("trajectory", "box_min", vec_text(s.spline.box_min));
      w.set("trajectory", "box_max", vec_text(s.spline.box_max));
      w.set("trajectory", "knot_spacing", s.spline.knot_spacing);
      w.set("trajectory", "yaw_step", s.spline.yaw_step);
      w.set("trajectory", "tilt_amplitude", s.spline.tilt_amplitude);
      break;
  }

  w.set("landmarks", "count", std::to_string(s.landmarks.count));
  w.set("landmarks", "layout", s.landmarks.layout == LandmarkLayout::Walls ? "walls" : "volume");
  w.set("landmarks", "box_min", vec_text(s.landmarks.box_min));
  w.set("landmarks", "box_max", vec_text(s.landmarks.box_max));
  w.set("landmarks", "max_range", s.landmarks.max_range);
  w.set("landmarks", "min_depth", s.landmarks.min_depth);

  const PinholeCamerad& cam = s.calib.camera;
  w.set("camera", "fx", cam.fx);
  w.set("camera", "fy", cam.fy);
  w.set("camera", "cx", cam.cx);
  w.set("camera", "cy", cam.cy);
  w.set("camera", "width", std::to_string(cam.width));
  w.set("camera", "height", std::to_string(cam.height));
  w.set("camera", "T_cb", vec_text(pose_vector(cam.T_cb)));

  w.set("imu", "gyro_noise", s.imu_noise.gyro_noise);
  w.set("imu", "accel_noise", s.imu_noise.accel_noise);
  w.set("imu", "gyro_walk", s.imu_noise.gyro_walk);
  w.set("imu", "accel_walk", s.imu_noise.accel_walk);
  w.set("imu", "gyro_bias", vec_text(s.initial_bias.gyro));
  w.set("imu", "accel_bias", vec_text(s.initial_bias.accel));
  w.set("imu", "gravity", vec_text(s.calib.gravity.g_world));

  const PixelNoiseSpec& p = s.pixel_noise;
  w.set("pixel_noise", "model", std::string(to_string(p.model)));
  switch (p.model) {
    case PixelNoiseModel::None: break;
    case PixelNoiseModel::Uniform: w.set("pixel_noise", "sigma", p.sigma); break;
    case PixelNoiseModel::TwoGroup:
      w.set("pixel_noise", "sigma_clean", p.sigma_clean);
      w.set("pixel_noise", "sigma_noisy", p.sigma_noisy);
      w.set("pixel_noise", "noisy_fraction", p.noisy_fraction);
      break;
    case PixelNoiseModel::LogUniform:
      w.set("pixel_noise", "sigma_min", p.sigma_min);
      w.set("pixel_noise", "sigma_max", p.sigma_max);
      break;
  }
  return w.str();
}

Simulation generate(const ScenarioConfig& config) {
  config.validate();
  // Independent streams so that e.g. changing the IMU noise leaves the landmark field untouched.
  std::seed_seq landmark_seed{config.seed, std::uint64_t{1}};
  std::seed_seq imu_seed{config.seed, std::uint64_t{2}};
  std::seed_seq pixel_seed{config.seed, std::uint64_t{3}};
  std::mt19937_64 landmark_rng(landmark_seed), imu_rng(imu_seed), pixel_rng(pixel_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian3 = [&](std::mt19937_64& rng) {
    const double x = normal(rng), y = normal(rng), z = normal(rng);
    return Eigen::Vector3d(x, y, z);
  };

  Simulation sim;
  Dataset& ds = sim.dataset;
  GroundTruth& truth = sim.truth;
  ds.name = config.name;
  ds.calib = config.calib;
  ds.meta = scenario_text(config);

  const TrajectoryModel trajectory = config.make_trajectory();
  const Eigen::Vector3d& g = config.calib.gravity.g_world;
  const ImuNoiseParams& noise = config.imu_noise;

  const int imu_count = static_cast<int>(std::llround(config.duration * config.imu_rate));
  const int frame_count = static_cast<int>(std::llround(config.duration * config.cam_rate));
  const int stride = config.imu_rate / config.cam_rate;
  const double dt = 1.0 / config.imu_rate;

  ImuBias bias = config.initial_bias;
  ds.imu.reserve(imu_count);
  for (int k = 0; k < imu_count; ++k) {
    const double t = k * dt;
    const MotionSample m = trajectory.at(t);
    const Eigen::Matrix3d R_wb = m.T_wb.rotation().matrix();
    ImuSample s;
    s.t = t;
    s.omega = m.omega_b + bias.gyro + noise.gyro_noise / std::sqrt(dt) * gaussian3(imu_rng);
    s.accel = R_wb.transpose() * (m.a_w - g) + bias.accel + noise.accel_noise / std::sqrt(dt) * gaussian3(imu_rng);
    ds.imu.push_back(s);
    truth.imu_rate.push_back({t, m.T_wb, m.v_w});
    truth.biases.push_back({t, bias});
    bias.gyro += noise.gyro_walk * std::sqrt(dt) * gaussian3(imu_rng);
    bias.accel += noise.accel_walk * std::sqrt(dt) * gaussian3(imu_rng);
  }
  ds.groundtruth = truth.imu_rate;

  truth.landmarks = make_landmarks(config, landmark_rng);
  for (const TrueLandmark& lm : truth.landmarks) ds.landmark_sigma_px[lm.id] = lm.sigma_px;

  const PinholeCamerad& cam = config.calib.camera;
  for (int j = 0; j < frame_count; ++j) {
    const double t = static_cast<double>(j * stride) * dt;
    const MotionSample m = trajectory.at(t);
    truth.frame_rate.push_back({t, m.T_wb, m.v_w});
    const SE3d T_cw = camera_from_world(cam, m.T_wb);
    FrameObservations frame{j, t, {}};
    for (const TrueLandmark& lm : truth.landmarks) {
      const Eigen::Vector3d p_cam = T_cw * lm.position;
      if (!(p_cam.z() > config.landmarks.min_depth) || p_cam.norm() > config.landmarks.max_range) continue;
      const Eigen::Vector2d uv_true = project(cam, p_cam);
      if (!cam.in_image(uv_true)) continue;
      // Noise is drawn for every visible observation so the stream is independent of the model.
      const double nx = normal(pixel_rng), ny = normal(pixel_rng);
      const Eigen::Vector2d uv = uv_true + lm.sigma_px * Eigen::Vector2d(nx, ny);
      frame.features.push_back({lm.id, uv, cam.normalize(uv)});
    }
    ds.frames.push_back(std::move(frame));
  }
  return sim;
}

void write_simulation(const std::filesystem::path& dir, const Simulation& sim) {
  write_dataset(dir, sim.dataset);
  std::ofstream out(dir / "landmarks.csv", std::ios::binary);
  if (!out) throw Error(ErrorCode::DatasetFormatError, "cannot write landmarks.csv");
  out << "landmark_id,x,y,z,sigma_px\n";
  for (const TrueLandmark& lm : sim.truth.landmarks) {
    out << lm.id << "," << fixed(lm.position.x(), 12) << "," << fixed(lm.position.y(), 12) << ","
        << fixed(lm.position.z(), 12) << "," << fixed(lm.sigma_px, 6) << "\n";
  }
}

}  // namespace vio
