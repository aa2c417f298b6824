#pragma once

#include <utility>

#include "bevguard/core/rng.hpp"
#include "bevguard/scene/types.hpp"

namespace bevguard::scene {

/// Synthetic detector. Detection probability and confidence are piecewise linear in range:
/// flat out to `r_hi`, then linear down to the value at the sensing radius.
struct SensorModel {
  double r_hi = 12.0;
  double p_detect_near = 0.98;
  double p_detect_far = 0.9;
  double occluded_detect_factor = 0.0;
  double center_noise = 0.1;       // meters, std-dev of rigid box jitter
  double heading_noise = 0.02;     // radians
  double false_positive_rate = 0.05;  // expected spurious boxes per frame
  double false_positive_confidence = 0.5;
  GridSpec grid{};

  double confidence_at(double range, double sensing_radius) const;
  double detect_probability(double range, double sensing_radius, bool occluded) const;
};

/// Posterior reported with a detection of the given confidence.
double posterior_for_confidence(double confidence);

bool is_occluded(const WorldState& state, const AgentPose& pose, Vec2 point, int ignore_object_id);

DetectionSet sense_detections(const WorldState& state, const AgentPose& pose, const SensorModel& sensor,
                              Rng& rng);

ConfidenceMap confidence_map(const WorldState& state, const AgentPose& pose, const SensorModel& sensor);

std::pair<DetectionSet, ConfidenceMap> sense(const WorldState& state, const AgentPose& pose,
                                             const SensorModel& sensor, Rng& rng);

/// Ground-truth boxes in grid coordinates, tagged with frame.
DetectionSet ground_truth(const WorldState& state, const GridSpec& grid);

}  // namespace bevguard::scene
