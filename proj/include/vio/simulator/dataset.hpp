#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "vio/geometry/camera.hpp"
#include "vio/imu/types.hpp"

namespace vio {

struct FeatureObservation {
  int landmark_id{0};
  Eigen::Vector2d uv{Eigen::Vector2d::Zero()};      // pixels
  Eigen::Vector2d p_norm{Eigen::Vector2d::Zero()};  // ((u-cx)/fx, (v-cy)/fy)
};

struct FrameObservations {
  int frame_id{0};
  double t{0};
  std::vector<FeatureObservation> features;
};

struct GroundTruthSample {
  double t{0};
  SE3d T_wb;
  Eigen::Vector3d v_w{Eigen::Vector3d::Zero()};
};

struct Calibration {
  PinholeCamerad camera;
  GravityModel gravity;
};

/// Everything the estimator consumes, as read from (or about to be written to) disk.
struct Dataset {
  std::string name;
  Calibration calib;
  std::vector<ImuSample> imu;
  std::vector<FrameObservations> frames;
  std::vector<GroundTruthSample> groundtruth;
  std::map<int, double> landmark_sigma_px;
  std::string meta;  // raw meta.cfg text, if any
};

/**
 * On-disk layout:
 *   imu.csv             t,wx,wy,wz,ax,ay,az
 *   features.csv        frame_id,t,landmark_id,u,v,xn,yn
 *   groundtruth.csv     t,px,py,pz,qw,qx,qy,qz,vx,vy,vz
 *   calib.cfg           fx fy cx cy width height T_cb gravity
 *   meta.cfg            generator settings (written by the simulator)
 *   landmark_noise.csv  landmark_id,sigma_px
 */
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

/// Throws DatasetFormatError (with file and line) on malformed or empty inputs.
Dataset read_dataset(const std::filesystem::path& dir);

Calibration read_calibration(const std::filesystem::path& file);
std::string calibration_text(const Calibration& calib);

std::vector<GroundTruthSample> read_groundtruth(const std::filesystem::path& file);
void write_pose_csv(const std::filesystem::path& file, const std::vector<GroundTruthSample>& rows);

using ReplayEvent = std::variant<ImuSample, FrameObservations>;

/// Pull-based, time-ordered replay: IMU samples up to and including a frame's
/// timestamp are delivered before that frame.
class DatasetReplay {
 public:
  explicit DatasetReplay(std::shared_ptr<const Dataset> dataset) : dataset_(std::move(dataset)) {}
  explicit DatasetReplay(const std::filesystem::path& dir);

  std::optional<ReplayEvent> next();
  void reset() { imu_index_ = frame_index_ = 0; }
  const Dataset& dataset() const { return *dataset_; }

 private:
  std::shared_ptr<const Dataset> dataset_;
  std::size_t imu_index_{0};
  std::size_t frame_index_{0};
};

}  // namespace vio
