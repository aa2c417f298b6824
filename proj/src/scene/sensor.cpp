#include "bevguard/scene/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bevguard::scene {

namespace {

double ramp(double range, double r_hi, double r_max, double near, double far) {
  if (range > r_max) return 0.0;
  if (range <= r_hi || r_max <= r_hi) return near;
  const double t = (range - r_hi) / (r_max - r_hi);
  return near + t * (far - near);
}

bool in_shadow(Vec2 eye, Vec2 occ_center, double occ_radius, Vec2 p) {
  const Vec2 to_occ = occ_center - eye;
  const double d_occ = to_occ.norm();
  if (d_occ <= occ_radius) return false;
  const Vec2 to_p = p - eye;
  const double d_p = to_p.norm();
  if (d_p <= d_occ + occ_radius) return false;  // the occluder itself stays visible
  const double half_angle = std::asin(occ_radius / d_occ);
  const double cos_theta = dot(to_p, to_occ) / (d_p * d_occ);
  return cos_theta > std::cos(half_angle);
}

double object_occluder_radius(const ObjectTrack& o) { return 0.5 * o.extent.y; }

}  // namespace

double SensorModel::confidence_at(double range, double sensing_radius) const {
  return std::clamp(ramp(range, r_hi, sensing_radius, 1.0, 0.0), 0.0, 1.0);
}

double SensorModel::detect_probability(double range, double sensing_radius, bool occluded) const {
  const double p = ramp(range, r_hi, sensing_radius, p_detect_near, p_detect_far);
  return std::clamp(occluded ? p * occluded_detect_factor : p, 0.0, 1.0);
}

double posterior_for_confidence(double confidence) { return 0.5 + 0.5 * std::clamp(confidence, 0.0, 1.0); }

bool is_occluded(const WorldState& state, const AgentPose& pose, Vec2 point, int ignore_object_id) {
  if (!pose.occluders_respected) return false;
  for (const auto& occ : state.occluders) {
    if (in_shadow(pose.position, occ.center, occ.radius, point)) return true;
  }
  for (const auto& o : state.objects) {
    if (o.id == ignore_object_id) continue;
    if (in_shadow(pose.position, o.center, object_occluder_radius(o), point)) return true;
  }
  return false;
}

DetectionSet sense_detections(const WorldState& state, const AgentPose& pose, const SensorModel& sensor,
                              Rng& rng) {
  DetectionSet out;
  out.frame = state.time_index;
  out.owner = pose.agent_id;
  const double res = sensor.grid.resolution;
  for (const auto& o : state.objects) {
    const double range = distance(o.center, pose.position);
    // Draws happen for every object so the stream layout does not depend on visibility.
    const double u = rng.uniform();
    const double nx = rng.normal(0.0, sensor.center_noise);
    const double ny = rng.normal(0.0, sensor.center_noise);
    const double nh = rng.normal(0.0, sensor.heading_noise);
    if (range > pose.sensing_radius) continue;
    const bool occluded = is_occluded(state, pose, o.center, o.id);
    if (u >= sensor.detect_probability(range, pose.sensing_radius, occluded)) continue;
    DetectionBox b;
    const Vec2 c{(o.center.x + nx) / res, (o.center.y + ny) / res};
    b.corners = make_corners(c, o.heading + nh, o.extent.x / res, o.extent.y / res);
    b.confidence = sensor.confidence_at(range, pose.sensing_radius);
    b.class_posterior = posterior_for_confidence(b.confidence);
    b.source_agent = pose.agent_id;
    out.boxes.push_back(b);
  }
  const int n_fp = rng.poisson(sensor.false_positive_rate);
  for (int i = 0; i < n_fp; ++i) {
    const double r = pose.sensing_radius * std::sqrt(rng.uniform());
    const double a = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
    Vec2 p = pose.position + Vec2{r * std::cos(a), r * std::sin(a)};
    p = {std::clamp(p.x, 1.0, state.bounds.x - 1.0), std::clamp(p.y, 1.0, state.bounds.y - 1.0)};
    DetectionBox b;
    b.corners = make_corners({p.x / res, p.y / res}, heading, 4.5 / res, 2.0 / res);
    b.confidence = sensor.false_positive_confidence * sensor.confidence_at(distance(p, pose.position),
                                                                           pose.sensing_radius);
    b.class_posterior = posterior_for_confidence(b.confidence);
    b.source_agent = pose.agent_id;
    out.boxes.push_back(b);
  }
  return out;
}

ConfidenceMap confidence_map(const WorldState& state, const AgentPose& pose, const SensorModel& sensor) {
  ConfidenceMap map{Grid<double>(sensor.grid, 0.0)};
  const GridSpec& g = sensor.grid;
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const Vec2 gc = g.cell_center(r, c);
      const Vec2 p{gc.x * g.resolution, gc.y * g.resolution};
      const double range = distance(p, pose.position);
      if (range > pose.sensing_radius) continue;
      if (is_occluded(state, pose, p, -1)) continue;
      map.cells.at(r, c) = sensor.confidence_at(range, pose.sensing_radius);
    }
  }
  return map;
}

std::pair<DetectionSet, ConfidenceMap> sense(const WorldState& state, const AgentPose& pose,
                                             const SensorModel& sensor, Rng& rng) {
  return {sense_detections(state, pose, sensor, rng), confidence_map(state, pose, sensor)};
}

DetectionSet ground_truth(const WorldState& state, const GridSpec& grid) {
  DetectionSet gt;
  gt.frame = state.time_index;
  for (const auto& o : state.objects) {
    DetectionBox b;
    const double res = grid.resolution;
    b.corners = make_corners({o.center.x / res, o.center.y / res}, o.heading, o.extent.x / res,
                             o.extent.y / res);
    gt.boxes.push_back(b);
  }
  return gt;
}

double ConfidenceMap::sum() const {
  double s = 0.0;
  for (double v : cells.data()) s += v;
  return s;
}

double ConfidenceMap::at(Vec2 grid_point) const {
  const Cell c = cell_of(cells.spec(), grid_point);
  return cells.at(c.row, c.col);
}

}  // namespace bevguard::scene
