#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "bevguard/attack/perturbation.hpp"
#include "bevguard/attack/schedule.hpp"
#include "bevguard/scene/sensor.hpp"
#include "bevguard/scene/world.hpp"
#include "bevguard/stattest/stattest.hpp"
#include "bevguard/temporal/config.hpp"

namespace bevguard::harness {

enum class Variant { gcp, gcp_s, gcp_t, baseline, none, upper, lower };
enum class AttackKind { bac, baseline, none };

const char* to_string(Variant v);
const char* to_string(AttackKind k);
Variant parse_variant(const std::string& s);
AttackKind parse_attack_kind(const std::string& s);

bool uses_temporal(Variant v);
bool uses_conformal(Variant v);

struct SceneBlock {
  int n_agents = 5;
  int ego = 0;
  int n_objects = 20;
  int grid_size = 64;  // square grid, 1 m cells
  int n_occluders = 4;
  double speed_min = 0.3;
  double speed_max = 1.0;
  double process_noise = 0.05;
  double sensing_radius = 35.0;
  double agent_margin = 8.0;  // agents are placed at least this far from the border
  scene::SensorModel sensor{};
};

struct AttackBlock {
  AttackKind kind = AttackKind::bac;
  attack::AttackMode mode = attack::AttackMode::random;
  int n_malicious = 2;
  double attack_ratio = 0.25;
  double alloc_std = 2.0;
  double propagation_rate = 0.3;
  attack::AttackBudget budget{};
  attack::SearchParams search{};
  double mask_update_fps = 0.5;
  double sim_fps = 10.0;
  int k_base = 6;
  double gamma_d = 0.3;
  double match_iou = 0.5;
};

struct DefenseBlock {
  Variant variant = Variant::gcp;
  temporal::TemporalConfig temporal{};
  temporal::KalmanParams kalman{};
  double alpha_bh = 0.1;
  stattest::ScoreWeights weights{};
  double nms_iou = 0.3;
  std::string model_path;
  std::string calibration_path;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  int frames = 100;
  SceneBlock scene{};
  AttackBlock attack{};
  DefenseBlock defense{};
  std::string trace_path;

  GridSpec grid() const { return {scene.grid_size, scene.grid_size, 1.0}; }
};

/// Throws ConfigError naming the offending field path.
void validate(const ScenarioConfig& cfg);

nlohmann::json to_json(const ScenarioConfig& cfg);
/// Parses a (possibly partial) document over the defaults. Unknown keys and type mismatches
/// are ConfigErrors carrying the field path.
ScenarioConfig from_json(const nlohmann::json& j);

/// Expands {variant}, {k_hist} and {out} placeholders in the model and calibration paths.
void resolve_resource_paths(ScenarioConfig& cfg);

ScenarioConfig load_config(const std::string& path);
void save_config(const ScenarioConfig& cfg, const std::string& path);

/// Applies "a.b.c=value" overrides; the value is parsed as JSON, falling back to a string.
nlohmann::json apply_overrides(nlohmann::json j, const std::vector<std::string>& overrides);

/// Output directory from BEVGUARD_OUT, defaulting to "out".
std::string output_dir();

}  // namespace bevguard::harness
