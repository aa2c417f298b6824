#include "bevguard/scene/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bevguard::scene {

namespace {

constexpr double kEdgeInset = 0.5;

bool inside(Vec2 p, Vec2 bounds) {
  return p.x >= 0.0 && p.x <= bounds.x && p.y >= 0.0 && p.y <= bounds.y;
}

double wrap(double v, double extent) {
  const double r = std::fmod(v, extent);
  return r < 0.0 ? r + extent : r;
}

}  // namespace

ObjectTrack spawn_object(const WorldConfig& cfg, int id, Rng& rng) {
  ObjectTrack o;
  o.id = id;
  o.center = {rng.uniform(kEdgeInset, cfg.bounds.x - kEdgeInset),
              rng.uniform(kEdgeInset, cfg.bounds.y - kEdgeInset)};
  o.heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
  o.extent = cfg.extent;
  const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
  o.velocity = {speed * std::cos(o.heading), speed * std::sin(o.heading)};
  return o;
}

ObjectTrack spawn_at_edge(Vec2 bounds, Vec2 extent, double speed, int id, Rng& rng) {
  ObjectTrack o;
  o.id = id;
  o.extent = extent;
  const auto edge = rng.integer(0, 3);
  const double t = rng.uniform(0.1, 0.9);
  double inward = 0.0;
  switch (edge) {
    case 0: o.center = {kEdgeInset, t * bounds.y}; inward = 0.0; break;
    case 1: o.center = {bounds.x - kEdgeInset, t * bounds.y}; inward = std::numbers::pi; break;
    case 2: o.center = {t * bounds.x, kEdgeInset}; inward = 0.5 * std::numbers::pi; break;
    default: o.center = {t * bounds.x, bounds.y - kEdgeInset}; inward = -0.5 * std::numbers::pi; break;
  }
  o.heading = inward + rng.uniform(-std::numbers::pi / 4, std::numbers::pi / 4);
  o.velocity = {speed * std::cos(o.heading), speed * std::sin(o.heading)};
  return o;
}

WorldState make_world(const WorldConfig& cfg, Rng& rng) {
  WorldState w;
  w.bounds = cfg.bounds;
  for (int i = 0; i < cfg.n_occluders; ++i) {
    Occluder occ;
    occ.center = {rng.uniform(0.15 * cfg.bounds.x, 0.85 * cfg.bounds.x),
                  rng.uniform(0.15 * cfg.bounds.y, 0.85 * cfg.bounds.y)};
    occ.radius = rng.uniform(cfg.occluder_radius_min, cfg.occluder_radius_max);
    w.occluders.push_back(occ);
  }
  for (int i = 0; i < cfg.n_objects; ++i) w.objects.push_back(spawn_object(cfg, w.next_id++, rng));
  return w;
}

WorldState step_world(const WorldState& state, double process_noise, Rng& rng, BoundaryPolicy policy) {
  WorldState next = state;
  next.time_index = state.time_index + 1;
  for (auto& o : next.objects) {
    const double nx = rng.normal(0.0, process_noise);
    const double ny = rng.normal(0.0, process_noise);
    o.center = o.center + o.velocity + Vec2{nx, ny};
    if (inside(o.center, next.bounds)) continue;
    if (policy == BoundaryPolicy::wrap) {
      o.center = {wrap(o.center.x, next.bounds.x), wrap(o.center.y, next.bounds.y)};
    } else {
      o = spawn_at_edge(next.bounds, o.extent, o.velocity.norm(), next.next_id++, rng);
    }
  }
  return next;
}

}  // namespace bevguard::scene
