#pragma once

#include <cmath>
#include <numbers>

#include "bevguard/core/geometry.hpp"
#include "bevguard/core/rng.hpp"
#include "bevguard/scene/types.hpp"

namespace bevguard::testing {

inline scene::DetectionBox box_at(Vec2 center, double heading = 0.0, double confidence = 1.0, double length = 4.5,
                                  double width = 2.0) {
  scene::DetectionBox b;
  b.corners = make_corners(center, heading, length, width);
  b.confidence = confidence;
  b.class_posterior = 0.5 + 0.5 * confidence;
  return b;
}

inline scene::DetectionBox random_box(Rng& rng, double extent, double min_conf = 0.1) {
  return box_at({rng.uniform(2.0, extent - 2.0), rng.uniform(2.0, extent - 2.0)},
                rng.uniform(-std::numbers::pi, std::numbers::pi), rng.uniform(min_conf, 1.0),
                rng.uniform(2.0, 5.0), rng.uniform(1.0, 2.5));
}

inline scene::DetectionSet random_set(Rng& rng, int n, double extent, int owner = 0, std::int64_t frame = 0) {
  scene::DetectionSet s;
  s.owner = owner;
  s.frame = frame;
  for (int i = 0; i < n; ++i) {
    auto b = random_box(rng, extent);
    b.source_agent = owner;
    s.boxes.push_back(b);
  }
  return s;
}

inline scene::DetectionSet set_of(std::initializer_list<scene::DetectionBox> boxes, std::int64_t frame = 0) {
  scene::DetectionSet s;
  s.frame = frame;
  s.boxes.assign(boxes.begin(), boxes.end());
  return s;
}

}  // namespace bevguard::testing
