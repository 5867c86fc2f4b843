#pragma once

#include <deque>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "vio/estimator/nav_state.hpp"
#include "vio/imu/preintegration.hpp"
#include "vio/simulator/dataset.hpp"
#include "vio/uncertainty/uncertainty.hpp"

namespace vio {

struct Keyframe {
  int frame_id{0};
  NavState state;
  std::vector<FeatureObservation> features;
};

/// Landmark track inside the window. Uninitialized tracks collect observations
/// until they pass the triangulation checks.
struct Landmark {
  int id{0};
  bool initialized{false};
  bool retired{false};  // left the window; its uncertainty is final
  Eigen::Vector3d position{Eigen::Vector3d::Zero()};
  LandmarkUncertainty uncertainty;
  std::map<int, FeatureObservation> observations;  // keyed by keyframe frame_id
};

/// Raw samples between two consecutive keyframes and their preintegration.
struct ImuSegment {
  std::vector<ImuSample> samples;
  PreintegratedImu pre;
};

/**
 * Fixed-size keyframe window. Keyframe k and k+1 are linked by segments()[k].
 * When the window overflows the oldest keyframe is discarded together with
 * every landmark that it observed and that is left with fewer than two
 * observations; the new oldest keyframe becomes the gauge anchor.
 */
class SlidingWindow {
 public:
  explicit SlidingWindow(int max_size = 10) : max_size_(max_size) {}

  struct InsertResult {
    std::optional<Keyframe> dropped;
    std::vector<Landmark> removed;  // landmarks deleted by the drop rule
  };

  /// `imu` must span the previous keyframe to this one (ignored for the first keyframe).
  InsertResult insert_keyframe(const NavState& state, int frame_id, std::vector<FeatureObservation> features,
                               std::vector<ImuSample> imu, const ImuNoiseParams& noise);

  int max_size() const { return max_size_; }
  std::size_t size() const { return keyframes_.size(); }
  bool empty() const { return keyframes_.empty(); }

  std::deque<Keyframe>& keyframes() { return keyframes_; }
  const std::deque<Keyframe>& keyframes() const { return keyframes_; }
  std::deque<ImuSegment>& segments() { return segments_; }
  const std::deque<ImuSegment>& segments() const { return segments_; }
  std::map<int, Landmark>& landmarks() { return landmarks_; }
  const std::map<int, Landmark>& landmarks() const { return landmarks_; }

  /// Index of the keyframe with `frame_id`, or -1.
  int index_of(int frame_id) const;

  /// Bias estimate of the oldest keyframe when it became the anchor; centers the bias prior.
  const ImuBias& anchor_bias() const { return anchor_bias_; }

  /// Re-preintegrates every segment whose start bias moved more than `threshold` from its bias_ref.
  int refresh_preintegration(const ImuNoiseParams& noise, double threshold);

 private:
  int max_size_;
  std::deque<Keyframe> keyframes_;
  std::deque<ImuSegment> segments_;
  std::map<int, Landmark> landmarks_;
  ImuBias anchor_bias_;
};

}  // namespace vio
