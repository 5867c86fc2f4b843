#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "vio/common/config.hpp"
#include "vio/simulator/dataset.hpp"
#include "vio/simulator/trajectory.hpp"

namespace vio {

enum class PixelNoiseModel { None, Uniform, TwoGroup, LogUniform };

std::string_view to_string(PixelNoiseModel m);

struct PixelNoiseSpec {
  PixelNoiseModel model{PixelNoiseModel::TwoGroup};
  double sigma{1.0};  // uniform
  double sigma_clean{0.5};
  double sigma_noisy{2.0};
  double noisy_fraction{0.5};
  double sigma_min{0.3};  // log-uniform range
  double sigma_max{3.0};
};

enum class LandmarkLayout { Walls, Volume };

struct LandmarkSpec {
  int count{300};
  LandmarkLayout layout{LandmarkLayout::Walls};
  Eigen::Vector3d box_min{-5, -5, 0};
  Eigen::Vector3d box_max{5, 5, 3};
  double max_range{12.0};  // m
  double min_depth{0.2};   // m
};

struct ScenarioConfig {
  std::string name{"scenario"};
  std::uint64_t seed{1};
  double duration{60.0};  // s
  int imu_rate{200};      // Hz
  int cam_rate{20};       // Hz

  TrajectoryModel::Kind trajectory{TrajectoryModel::Kind::Circle};
  TrajectoryModel::CircleParams circle;
  TrajectoryModel::LissajousParams lissajous;
  TrajectoryModel::SplineParams spline;

  LandmarkSpec landmarks;
  Calibration calib;

  ImuNoiseParams imu_noise;
  ImuBias initial_bias;
  PixelNoiseSpec pixel_noise;

  /// Throws ConfigError on inconsistent rates, fractions or camera parameters.
  void validate() const;
  TrajectoryModel make_trajectory() const;
};

ScenarioConfig parse_scenario(const ConfigFile& cfg);
ScenarioConfig load_scenario(const std::filesystem::path& file);
/// Round-trips through parse_scenario.
std::string scenario_text(const ScenarioConfig& config);

struct TrueLandmark {
  int id{0};
  Eigen::Vector3d position{Eigen::Vector3d::Zero()};
  double sigma_px{0};
};

struct BiasSample {
  double t{0};
  ImuBias bias;
};

struct GroundTruth {
  std::vector<GroundTruthSample> imu_rate;    // one per IMU sample
  std::vector<GroundTruthSample> frame_rate;  // one per camera frame
  std::vector<BiasSample> biases;             // true biases at IMU rate
  std::vector<TrueLandmark> landmarks;
};

struct Simulation {
  Dataset dataset;
  GroundTruth truth;
};

/// Deterministic for a fixed config (including seed).
Simulation generate(const ScenarioConfig& config);

/// Writes the dataset files plus landmarks.csv (true positions and noise labels).
void write_simulation(const std::filesystem::path& dir, const Simulation& sim);

}  // namespace vio
