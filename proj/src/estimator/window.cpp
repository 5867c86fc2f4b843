#include "vio/estimator/window.hpp"

#include <algorithm>

namespace vio {

SlidingWindow::InsertResult SlidingWindow::insert_keyframe(const NavState& state, int frame_id,
                                                           std::vector<FeatureObservation> features,
                                                           std::vector<ImuSample> imu, const ImuNoiseParams& noise) {
  if (keyframes_.empty()) {
    anchor_bias_ = state.bias;
  } else {
    ImuSegment segment;
    segment.pre = preintegrate(imu, keyframes_.back().state.bias, noise);
    segment.samples = std::move(imu);
    segments_.push_back(std::move(segment));
  }
  for (const FeatureObservation& f : features) {
    Landmark& lm = landmarks_[f.landmark_id];
    lm.id = f.landmark_id;
    lm.observations[frame_id] = f;
  }
  keyframes_.push_back({frame_id, state, std::move(features)});

  InsertResult result;
  if (static_cast<int>(keyframes_.size()) <= max_size_) return result;

  Keyframe oldest = std::move(keyframes_.front());
  keyframes_.pop_front();
  segments_.pop_front();
  anchor_bias_ = keyframes_.front().state.bias;
  for (const FeatureObservation& f : oldest.features) {
    auto it = landmarks_.find(f.landmark_id);
    if (it == landmarks_.end()) continue;
    it->second.observations.erase(oldest.frame_id);
    if (it->second.observations.size() < 2) {
      result.removed.push_back(std::move(it->second));
      landmarks_.erase(it);
    }
  }
  result.dropped = std::move(oldest);
  return result;
}

int SlidingWindow::index_of(int frame_id) const {
  for (std::size_t i = 0; i < keyframes_.size(); ++i) {
    if (keyframes_[i].frame_id == frame_id) return static_cast<int>(i);
  }
  return -1;
}

int SlidingWindow::refresh_preintegration(const ImuNoiseParams& noise, double threshold) {
  int refreshed = 0;
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    const ImuBias& bias = keyframes_[k].state.bias;
    const ImuBias& ref = segments_[k].pre.bias_ref;
    const double moved = std::max((bias.accel - ref.accel).cwiseAbs().maxCoeff(),
                                  (bias.gyro - ref.gyro).cwiseAbs().maxCoeff());
    if (moved > threshold) {
      segments_[k].pre = preintegrate(segments_[k].samples, bias, noise);
      ++refreshed;
    }
  }
  return refreshed;
}

}  // namespace vio
