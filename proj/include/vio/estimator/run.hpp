#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vio/common/config.hpp"
#include "vio/estimator/estimator.hpp"
#include "vio/simulator/dataset.hpp"

namespace vio {

/**
 * Estimator settings from an INI file with sections [estimator],
 * [uncertainty], [imu_noise] and [solver]. Unknown keys and out-of-range
 * values raise ConfigError.
 */
EstimatorConfig parse_run_config(const ConfigFile& cfg);
EstimatorConfig load_run_config(const std::filesystem::path& file);
std::string run_config_text(const EstimatorConfig& config);

struct RunResult {
  std::string sequence;
  std::string dataset_path;  // recorded in run_info.json for later evaluation
  Mode mode{Mode::Baseline};
  std::vector<FrameEstimate> frames;
  Instrumentation stats;
  std::vector<PixelCovarianceRow> pixel_covariances;
  std::vector<Landmark> landmarks;  // retired and live landmarks with their final uncertainty
  long failed_window_solves{0};
  long dead_reckoned_frames{0};
  long keyframes{0};
  bool initialized_from_groundtruth{false};
  double wall_ms{0};
};

/// First navigation state: ground truth at the first frame when available,
/// otherwise a gravity-aligned attitude at rest at the origin.
NavState initial_state(const Dataset& dataset, bool* from_groundtruth = nullptr);

/// Replays the dataset through the estimator. Deterministic for a fixed dataset and config.
RunResult run_sequence(const Dataset& dataset, const EstimatorConfig& config);

std::vector<GroundTruthSample> trajectory_rows(const RunResult& result);
std::string timing_json(const RunResult& result);

/// trajectory.csv, timing.json, uncertainty.csv, landmark_uncertainty.csv and run_info.json.
void write_run_outputs(const std::filesystem::path& dir, const RunResult& result);

}  // namespace vio
