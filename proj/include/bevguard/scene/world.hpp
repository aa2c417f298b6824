#pragma once

#include "bevguard/core/rng.hpp"
#include "bevguard/scene/types.hpp"

namespace bevguard::scene {

enum class BoundaryPolicy { respawn, wrap };

struct WorldConfig {
  Vec2 bounds{64.0, 64.0};
  int n_objects = 20;
  double speed_min = 0.3;  // meters per frame
  double speed_max = 1.0;
  Vec2 extent{4.5, 2.0};
  int n_occluders = 4;
  double occluder_radius_min = 1.5;
  double occluder_radius_max = 3.5;
  BoundaryPolicy boundary = BoundaryPolicy::respawn;
};

ObjectTrack spawn_object(const WorldConfig& cfg, int id, Rng& rng);
ObjectTrack spawn_at_edge(Vec2 bounds, Vec2 extent, double speed, int id, Rng& rng);

WorldState make_world(const WorldConfig& cfg, Rng& rng);

/// Advances every object by its velocity plus isotropic Gaussian noise. Objects leaving the
/// bounds are respawned on a random edge (or wrapped), so the object count stays constant.
WorldState step_world(const WorldState& state, double process_noise, Rng& rng,
                      BoundaryPolicy policy = BoundaryPolicy::respawn);

}  // namespace bevguard::scene
