#pragma once

#include <cstdint>
#include <vector>

#include "bevguard/core/geometry.hpp"
#include "bevguard/core/grid.hpp"

namespace bevguard::scene {

struct ObjectTrack {
  int id = 0;
  Vec2 center;          // meters
  double heading = 0.0;  // radians
  Vec2 extent{4.5, 2.0};  // (length, width) meters
  Vec2 velocity;         // meters per frame
};

/// Static circular occluder (building, parked truck) in world meters.
struct Occluder {
  Vec2 center;
  double radius = 1.0;
};

struct WorldState {
  std::int64_t time_index = 0;
  std::vector<ObjectTrack> objects;
  Vec2 bounds{64.0, 64.0};  // (width, height) meters
  std::vector<Occluder> occluders;
  int next_id = 0;
};

struct AgentPose {
  int agent_id = 0;
  Vec2 position;  // meters
  double sensing_radius = 25.0;
  bool occluders_respected = true;
};

/// One detected object. Corners are in BEV grid coordinates.
struct DetectionBox {
  Corners corners{};
  double class_posterior = 1.0;
  double confidence = 1.0;
  int source_agent = -1;
  // Simulator bookkeeping: the box was fabricated or displaced by an attacker.
  // Never consulted by the defense.
  bool forged = false;
};

struct DetectionSet {
  std::vector<DetectionBox> boxes;
  std::int64_t frame = 0;
  int owner = -1;

  std::size_t size() const { return boxes.size(); }
  bool empty() const { return boxes.empty(); }
};

/// Per-cell ego confidence in [0, 1].
struct ConfidenceMap {
  Grid<double> cells;

  const GridSpec& spec() const { return cells.spec(); }
  double sum() const;
  double at(Vec2 grid_point) const;
};

}  // namespace bevguard::scene
