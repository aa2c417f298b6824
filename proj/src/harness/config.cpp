#include "bevguard/harness/config.hpp"

#include <cstdlib>
#include <fstream>

#include "bevguard/core/error.hpp"

namespace bevguard::harness {

using nlohmann::json;

const char* to_string(Variant v) {
  switch (v) {
    case Variant::gcp:
      return "gcp";
    case Variant::gcp_s:
      return "gcp-s";
    case Variant::gcp_t:
      return "gcp-t";
    case Variant::baseline:
      return "baseline";
    case Variant::none:
      return "none";
    case Variant::upper:
      return "upper";
    case Variant::lower:
      return "lower";
  }
  return "?";
}

const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::bac:
      return "bac";
    case AttackKind::baseline:
      return "baseline";
    case AttackKind::none:
      return "none";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::gcp, Variant::gcp_s, Variant::gcp_t, Variant::baseline, Variant::none, Variant::upper,
                    Variant::lower}) {
    if (s == to_string(v)) return v;
  }
  throw ConfigError("defense.variant: unknown variant '" + s + "'");
}

AttackKind parse_attack_kind(const std::string& s) {
  for (AttackKind k : {AttackKind::bac, AttackKind::baseline, AttackKind::none}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("attack.kind: unknown attack '" + s + "'");
}

bool uses_temporal(Variant v) { return v == Variant::gcp || v == Variant::gcp_t; }
bool uses_conformal(Variant v) { return v == Variant::gcp || v == Variant::gcp_t; }

namespace {

const char* mode_name(attack::AttackMode m) {
  switch (m) {
    case attack::AttackMode::random:
      return "R";
    case attack::AttackMode::poisson:
      return "P";
    case attack::AttackMode::spreading:
      return "S";
  }
  return "?";
}

attack::AttackMode parse_mode(const std::string& s) {
  if (s == "R") return attack::AttackMode::random;
  if (s == "P") return attack::AttackMode::poisson;
  if (s == "S") return attack::AttackMode::spreading;
  throw ConfigError("attack.mode: expected one of R, P, S, got '" + s + "'");
}

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path + ": " + what);
}

void merge(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError((path.empty() ? "<root>" : path) + ": expected an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string p = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError(p + ": unknown field");
    if (base[key].is_object()) {
      merge(base[key], value, p);
    } else {
      base[key] = value;
    }
  }
}

template <typename T>
T get(const json& node, const std::string& key, const std::string& path) {
  const std::string p = path.empty() ? key : path + "." + key;
  try {
    return node.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(p + ": wrong type (found " + std::string(node.at(key).type_name()) + ")");
  }
}

}  // namespace

json to_json(const ScenarioConfig& c) {
  const auto& s = c.scene;
  const auto& a = c.attack;
  const auto& d = c.defense;
  json j;
  j["schema"] = "bevguard.scenario/1";
  j["seed"] = c.seed;
  j["frames"] = c.frames;
  j["trace_path"] = c.trace_path;
  j["scene"] = {{"n_agents", s.n_agents},
                {"ego", s.ego},
                {"n_objects", s.n_objects},
                {"grid_size", s.grid_size},
                {"n_occluders", s.n_occluders},
                {"speed_min", s.speed_min},
                {"speed_max", s.speed_max},
                {"process_noise", s.process_noise},
                {"sensing_radius", s.sensing_radius},
                {"agent_margin", s.agent_margin},
                {"sensor",
                 {{"r_hi", s.sensor.r_hi},
                  {"p_detect_near", s.sensor.p_detect_near},
                  {"p_detect_far", s.sensor.p_detect_far},
                  {"occluded_detect_factor", s.sensor.occluded_detect_factor},
                  {"center_noise", s.sensor.center_noise},
                  {"heading_noise", s.sensor.heading_noise},
                  {"false_positive_rate", s.sensor.false_positive_rate},
                  {"false_positive_confidence", s.sensor.false_positive_confidence}}}};
  j["attack"] = {{"kind", to_string(a.kind)},
                 {"mode", mode_name(a.mode)},
                 {"n_malicious", a.n_malicious},
                 {"attack_ratio", a.attack_ratio},
                 {"alloc_std", a.alloc_std},
                 {"propagation_rate", a.propagation_rate},
                 {"delta_i", a.budget.delta_i},
                 {"delta_o", a.budget.delta_o},
                 {"w_delta", a.budget.w_delta},
                 {"iters", a.search.iters},
                 {"p_inject", a.search.p_inject},
                 {"p_shift", a.search.p_shift},
                 {"p_drop", a.search.p_drop},
                 {"max_shift", a.search.max_shift},
                 {"samples_per_axis", a.search.samples_per_axis},
                 {"cost_inject", a.search.costs.inject},
                 {"cost_drop", a.search.costs.drop},
                 {"cost_shift_per_unit", a.search.costs.shift_per_unit},
                 {"mask_update_fps", a.mask_update_fps},
                 {"sim_fps", a.sim_fps},
                 {"k_base", a.k_base},
                 {"gamma_d", a.gamma_d},
                 {"match_iou", a.match_iou}};
  j["defense"] = {{"variant", to_string(d.variant)},
                  {"k_hist", d.temporal.k_hist},
                  {"l_interp", d.temporal.l_interp},
                  {"tau", d.temporal.tau},
                  {"conf_low", d.temporal.conf_low},
                  {"kappa_p", d.temporal.kappa_p},
                  {"phi", d.temporal.phi},
                  {"unseen_iou", d.temporal.unseen_iou},
                  {"q_scale", d.kalman.q_scale},
                  {"r_scale", d.kalman.r_scale},
                  {"velocity_prior", d.kalman.velocity_prior},
                  {"alpha_bh", d.alpha_bh},
                  {"omega_s", d.weights.omega_s},
                  {"omega_t", d.weights.omega_t},
                  {"nms_iou", d.nms_iou},
                  {"model_path", d.model_path},
                  {"calibration_path", d.calibration_path}};
  return j;
}

ScenarioConfig from_json(const json& patch) {
  json j = to_json(ScenarioConfig{});
  json p = patch;
  if (p.is_object() && p.contains("schema")) {
    require(p["schema"] == j["schema"], "schema", "unsupported schema " + p["schema"].dump());
  }
  merge(j, p, "");
  ScenarioConfig c;
  c.seed = get<std::uint64_t>(j, "seed", "");
  c.frames = get<int>(j, "frames", "");
  c.trace_path = get<std::string>(j, "trace_path", "");

  const json& s = j["scene"];
  auto& sc = c.scene;
  sc.n_agents = get<int>(s, "n_agents", "scene");
  sc.ego = get<int>(s, "ego", "scene");
  sc.n_objects = get<int>(s, "n_objects", "scene");
  sc.grid_size = get<int>(s, "grid_size", "scene");
  sc.n_occluders = get<int>(s, "n_occluders", "scene");
  sc.speed_min = get<double>(s, "speed_min", "scene");
  sc.speed_max = get<double>(s, "speed_max", "scene");
  sc.process_noise = get<double>(s, "process_noise", "scene");
  sc.sensing_radius = get<double>(s, "sensing_radius", "scene");
  sc.agent_margin = get<double>(s, "agent_margin", "scene");
  const json& sn = s["sensor"];
  sc.sensor.r_hi = get<double>(sn, "r_hi", "scene.sensor");
  sc.sensor.p_detect_near = get<double>(sn, "p_detect_near", "scene.sensor");
  sc.sensor.p_detect_far = get<double>(sn, "p_detect_far", "scene.sensor");
  sc.sensor.occluded_detect_factor = get<double>(sn, "occluded_detect_factor", "scene.sensor");
  sc.sensor.center_noise = get<double>(sn, "center_noise", "scene.sensor");
  sc.sensor.heading_noise = get<double>(sn, "heading_noise", "scene.sensor");
  sc.sensor.false_positive_rate = get<double>(sn, "false_positive_rate", "scene.sensor");
  sc.sensor.false_positive_confidence = get<double>(sn, "false_positive_confidence", "scene.sensor");
  sc.sensor.grid = c.grid();

  const json& a = j["attack"];
  auto& ac = c.attack;
  ac.kind = parse_attack_kind(get<std::string>(a, "kind", "attack"));
  ac.mode = parse_mode(get<std::string>(a, "mode", "attack"));
  ac.n_malicious = get<int>(a, "n_malicious", "attack");
  ac.attack_ratio = get<double>(a, "attack_ratio", "attack");
  ac.alloc_std = get<double>(a, "alloc_std", "attack");
  ac.propagation_rate = get<double>(a, "propagation_rate", "attack");
  ac.budget.delta_i = get<double>(a, "delta_i", "attack");
  ac.budget.delta_o = get<double>(a, "delta_o", "attack");
  ac.budget.w_delta = get<double>(a, "w_delta", "attack");
  ac.search.iters = get<int>(a, "iters", "attack");
  ac.search.p_inject = get<double>(a, "p_inject", "attack");
  ac.search.p_shift = get<double>(a, "p_shift", "attack");
  ac.search.p_drop = get<double>(a, "p_drop", "attack");
  ac.search.max_shift = get<double>(a, "max_shift", "attack");
  ac.search.samples_per_axis = get<int>(a, "samples_per_axis", "attack");
  ac.search.costs.inject = get<double>(a, "cost_inject", "attack");
  ac.search.costs.drop = get<double>(a, "cost_drop", "attack");
  ac.search.costs.shift_per_unit = get<double>(a, "cost_shift_per_unit", "attack");
  ac.mask_update_fps = get<double>(a, "mask_update_fps", "attack");
  ac.sim_fps = get<double>(a, "sim_fps", "attack");
  ac.k_base = get<int>(a, "k_base", "attack");
  ac.gamma_d = get<double>(a, "gamma_d", "attack");
  ac.match_iou = get<double>(a, "match_iou", "attack");

  const json& d = j["defense"];
  auto& dc = c.defense;
  dc.variant = parse_variant(get<std::string>(d, "variant", "defense"));
  dc.temporal.k_hist = get<int>(d, "k_hist", "defense");
  dc.temporal.l_interp = get<int>(d, "l_interp", "defense");
  dc.temporal.tau = get<double>(d, "tau", "defense");
  dc.temporal.conf_low = get<double>(d, "conf_low", "defense");
  dc.temporal.kappa_p = get<double>(d, "kappa_p", "defense");
  dc.temporal.phi = get<double>(d, "phi", "defense");
  dc.temporal.unseen_iou = get<double>(d, "unseen_iou", "defense");
  dc.kalman.q_scale = get<double>(d, "q_scale", "defense");
  dc.kalman.r_scale = get<double>(d, "r_scale", "defense");
  dc.kalman.velocity_prior = get<double>(d, "velocity_prior", "defense");
  dc.alpha_bh = get<double>(d, "alpha_bh", "defense");
  dc.weights.omega_s = get<double>(d, "omega_s", "defense");
  dc.weights.omega_t = get<double>(d, "omega_t", "defense");
  dc.nms_iou = get<double>(d, "nms_iou", "defense");
  dc.model_path = get<std::string>(d, "model_path", "defense");
  dc.calibration_path = get<std::string>(d, "calibration_path", "defense");
  resolve_resource_paths(c);
  validate(c);
  return c;
}

void validate(const ScenarioConfig& c) {
  require(c.frames >= 1, "frames", "must be >= 1");
  const auto& s = c.scene;
  require(s.n_agents >= 1, "scene.n_agents", "must be >= 1");
  require(s.ego >= 0 && s.ego < s.n_agents, "scene.ego", "must index an agent");
  require(s.n_objects >= 0, "scene.n_objects", "must be >= 0");
  require(s.grid_size >= 4, "scene.grid_size", "must be >= 4");
  require(s.n_occluders >= 0, "scene.n_occluders", "must be >= 0");
  require(s.speed_min >= 0.0 && s.speed_max >= s.speed_min, "scene.speed_max", "must be >= speed_min >= 0");
  require(s.process_noise >= 0.0, "scene.process_noise", "must be >= 0");
  require(s.sensing_radius > 0.0, "scene.sensing_radius", "must be > 0");
  require(s.agent_margin >= 0.0 && 2.0 * s.agent_margin < s.grid_size, "scene.agent_margin",
          "must be >= 0 and leave room inside the grid");
  require(s.sensor.r_hi >= 0.0, "scene.sensor.r_hi", "must be >= 0");
  for (double p : {s.sensor.p_detect_near, s.sensor.p_detect_far, s.sensor.occluded_detect_factor,
                   s.sensor.false_positive_confidence}) {
    require(p >= 0.0 && p <= 1.0, "scene.sensor", "probabilities and confidences must lie in [0, 1]");
  }
  require(s.sensor.false_positive_rate >= 0.0, "scene.sensor.false_positive_rate", "must be >= 0");

  const auto& a = c.attack;
  const int collaborators = s.n_agents - 1;
  if (a.kind != AttackKind::none) {
    require(a.n_malicious >= 0 && a.n_malicious <= collaborators, "attack.n_malicious",
            "must lie in [0, number of collaborators]");
    require(a.attack_ratio >= 0.0 && a.attack_ratio <= 1.0, "attack.attack_ratio", "must lie in [0, 1]");
  }
  require(a.alloc_std >= 0.0, "attack.alloc_std", "must be >= 0");
  require(a.propagation_rate >= 0.0, "attack.propagation_rate", "must be >= 0");
  require(a.budget.delta_i >= 0.0, "attack.delta_i", "must be >= 0");
  require(a.budget.delta_o >= 0.0, "attack.delta_o", "must be >= 0");
  require(a.budget.w_delta >= 0.0, "attack.w_delta", "must be >= 0");
  require(a.search.iters >= 1, "attack.iters", "must be >= 1");
  require(a.search.p_inject >= 0.0 && a.search.p_shift >= 0.0 && a.search.p_drop >= 0.0 &&
              a.search.p_inject + a.search.p_shift + a.search.p_drop > 0.0,
          "attack.p_inject", "edit proposal probabilities must be >= 0 with a positive sum");
  require(a.search.max_shift >= 0.0, "attack.max_shift", "must be >= 0");
  require(a.search.samples_per_axis >= 1, "attack.samples_per_axis", "must be >= 1");
  require(a.search.costs.inject >= 0.0 && a.search.costs.drop >= 0.0 && a.search.costs.shift_per_unit >= 0.0,
          "attack.cost_inject", "edit costs must be >= 0");
  require(a.mask_update_fps > 0.0, "attack.mask_update_fps", "must be > 0");
  require(a.sim_fps > 0.0, "attack.sim_fps", "must be > 0");
  require(a.k_base >= 1, "attack.k_base", "must be >= 1");
  require(a.gamma_d >= 0.0, "attack.gamma_d", "must be >= 0");
  require(a.match_iou > 0.0 && a.match_iou <= 1.0, "attack.match_iou", "must lie in (0, 1]");

  const auto& d = c.defense;
  require(d.temporal.k_hist >= 1, "defense.k_hist", "must be >= 1");
  require(d.temporal.l_interp >= 0, "defense.l_interp", "must be >= 0");
  require(d.temporal.tau > 0.0, "defense.tau", "must be > 0");
  require(d.temporal.conf_low >= 0.0 && d.temporal.conf_low <= 1.0, "defense.conf_low", "must lie in [0, 1]");
  require(d.temporal.kappa_p >= 0.0, "defense.kappa_p", "must be >= 0");
  require(d.temporal.phi >= 0.0, "defense.phi", "must be >= 0");
  require(d.temporal.unseen_iou > 0.0 && d.temporal.unseen_iou <= 1.0, "defense.unseen_iou", "must lie in (0, 1]");
  require(d.kalman.q_scale >= 0.0, "defense.q_scale", "must be >= 0");
  require(d.kalman.r_scale > 0.0, "defense.r_scale", "must be > 0");
  require(d.kalman.velocity_prior > 0.0, "defense.velocity_prior", "must be > 0");
  require(d.alpha_bh > 0.0 && d.alpha_bh < 1.0, "defense.alpha_bh", "must lie in (0, 1)");
  require(d.weights.omega_s >= 0.0 && d.weights.omega_t >= 0.0 && d.weights.omega_s + d.weights.omega_t > 0.0,
          "defense.omega_s", "weights must be >= 0 with a positive sum");
  require(d.nms_iou > 0.0 && d.nms_iou <= 1.0, "defense.nms_iou", "must lie in (0, 1]");
}

namespace {

void substitute(std::string& s, const std::string& token, const std::string& value) {
  for (auto pos = s.find(token); pos != std::string::npos; pos = s.find(token, pos + value.size())) {
    s.replace(pos, token.size(), value);
  }
}

}  // namespace

void resolve_resource_paths(ScenarioConfig& cfg) {
  for (std::string* p : {&cfg.defense.model_path, &cfg.defense.calibration_path}) {
    substitute(*p, "{variant}", to_string(cfg.defense.variant));
    substitute(*p, "{k_hist}", std::to_string(cfg.defense.temporal.k_hist));
    substitute(*p, "{out}", output_dir());
  }
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  return from_json(j);
}

void save_config(const ScenarioConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file " + path);
  out << to_json(cfg).dump(2) << '\n';
}

json apply_overrides(json j, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "': expected key=value");
    const std::string key = o.substr(0, eq);
    const std::string text = o.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json* node = &j;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      node = &(*node)[part];
      start = dot + 1;
    }
  }
  return j;
}

std::string output_dir() {
  const char* env = std::getenv("BEVGUARD_OUT");
  return env && *env ? env : "out";
}

}  // namespace bevguard::harness
