#include "bevguard/harness/pipeline.hpp"

#include <algorithm>

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bevguard/core/error.hpp"
#include "bevguard/core/rng.hpp"

namespace bevguard::harness {

using nlohmann::json;

SplitSizes split_sizes(std::size_t n) {
  const auto val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  const auto test = val;
  return {n - val - test, val, test};
}

std::uint64_t scenario_seed(std::uint64_t base, std::uint64_t s) { return derive_seed(base, 0x5eed, s); }

FlowDataset build_flow_dataset(const ScenarioConfig& cfg, std::size_t n_scenarios, std::uint64_t seed) {
  if (n_scenarios == 0) throw ConfigError("build_flow_dataset: need at least one scenario");
  const SplitSizes sizes = split_sizes(n_scenarios);
  FlowDataset ds;
  ds.train_scenarios = sizes.train;
  ds.val_scenarios = sizes.val;
  ds.test_scenarios = sizes.test;
  for (std::size_t s = 0; s < n_scenarios; ++s) {
    ScenarioConfig c = cfg;
    c.seed = scenario_seed(seed, s);
    c.attack.kind = AttackKind::none;
    c.defense.variant = Variant::gcp_s;
    std::vector<temporal::BevFlow> flows;
    Resources res;
    res.flow_sink = &flows;
    run_scenario(c, res, RunMode::observe);
    auto& dst = s < sizes.train ? ds.train : (s < sizes.train + sizes.val ? ds.val : ds.test);
    for (auto& f : flows) dst.push_back(std::move(f));
  }
  return ds;
}

void write_flows_jsonl(const std::vector<temporal::BevFlow>& flows, const std::string& split, std::ostream& out) {
  for (const auto& f : flows) {
    json steps = json::array();
    for (const auto& b : f.boxes) steps.push_back(std::vector<double>(b.begin(), b.end()));
    json prov = json::array();
    for (auto p : f.provenance) prov.push_back(temporal::to_string(p));
    out << json{{"schema", "bevguard.flow/1"}, {"split", split}, {"steps", steps}, {"provenance", prov},
                {"frames", f.frames}}
               .dump()
        << '\n';
  }
}

std::vector<temporal::BevFlow> read_flows_jsonl(std::istream& in, const std::string& split) {
  std::vector<temporal::BevFlow> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (j.at("schema") != "bevguard.flow/1") throw InputError("unsupported schema");
      if (!split.empty() && j.at("split") != split) continue;
      temporal::BevFlow f;
      for (const auto& s : j.at("steps")) {
        const auto v = s.get<std::vector<double>>();
        if (v.size() != 8) throw InputError("step must hold 8 values");
        Corners c{};
        std::copy(v.begin(), v.end(), c.begin());
        f.boxes.push_back(c);
        f.forged.push_back(0);
      }
      for (const auto& p : j.at("provenance")) {
        const auto name = p.get<std::string>();
        f.provenance.push_back(name == "interpolated" ? temporal::FrameFlag::interpolated
                                                      : temporal::FrameFlag::observed);
      }
      f.frames = j.at("frames").get<std::vector<std::int64_t>>();
      out.push_back(std::move(f));
    } catch (const std::exception& e) {
      throw InputError("flow file line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_flow_dataset(const FlowDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write flow file " + path);
  write_flows_jsonl(ds.train, "train", out);
  write_flows_jsonl(ds.val, "val", out);
  write_flows_jsonl(ds.test, "test", out);
}

FlowDataset load_flow_dataset(const std::string& path) {
  FlowDataset ds;
  for (const char* split : {"train", "val", "test"}) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read flow file " + path);
    auto flows = read_flows_jsonl(in, split);
    if (std::string(split) == "train") ds.train = std::move(flows);
    if (std::string(split) == "val") ds.val = std::move(flows);
    if (std::string(split) == "test") ds.test = std::move(flows);
  }
  return ds;
}

temporal::LstmAeModel train_model(const FlowDataset& ds, const ScenarioConfig& cfg, const temporal::TrainConfig& train) {
  const double extent = static_cast<double>(cfg.scene.grid_size);
  auto model = temporal::init_lstm_ae({}, {extent, extent}, cfg.defense.temporal.k_hist, train.seed);
  std::vector<Eigen::MatrixXd> data;
  for (const auto& f : ds.train) data.push_back(temporal::flow_matrix(f, model));
  return temporal::train_ae(data, std::move(model), train);
}

stattest::CalibrationSet build_calibration(const ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                           const Resources& resources) {
  if (seeds.empty()) throw ConfigError("build_calibration: need at least one clean run");
  std::vector<stattest::RawScore> raw;
  for (auto seed : seeds) {
    ScenarioConfig c = cfg;
    c.seed = seed;
    c.attack.kind = AttackKind::none;
    const auto report = run_scenario(c, {resources.model, nullptr, nullptr}, RunMode::observe);
    for (const auto& s : report.scores) raw.push_back(s.raw);
  }
  stattest::ScoreWeights w = cfg.defense.weights;
  if (cfg.defense.variant == Variant::gcp_t) w = {0.0, 1.0};
  return stattest::make_calibration(std::move(raw), seeds, to_string(cfg.defense.variant), w);
}

std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t n) {
  std::vector<std::uint64_t> s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(base + i);
  return s;
}

std::vector<stattest::ScoreWeights> weight_grid() {
  std::vector<stattest::ScoreWeights> grid;
  for (double ws : {0.0, 0.25, 0.5, 1.0, 2.0}) {
    for (double wt : {0.0, 0.25, 0.5, 1.0, 2.0}) {
      if (ws + wt > 0.0) grid.push_back({ws, wt});
    }
  }
  std::stable_partition(grid.begin(), grid.end(), [](const auto& w) { return w.omega_s == 1.0 && w.omega_t == 1.0; });
  return grid;
}

stattest::CalibrationSet fit_calibration_weights(const ScenarioConfig& cfg, const stattest::CalibrationSet& cal,
                                                 const std::vector<std::uint64_t>& seeds, const Resources& resources,
                                                 double* f1) {
  if (seeds.empty()) throw ConfigError("fit_calibration_weights: need at least one labeled run");
  std::vector<stattest::LabeledScore> labeled;
  for (auto seed : seeds) {
    ScenarioConfig c = cfg;
    c.seed = seed;
    for (const auto& s : run_scenario(c, {resources.model, nullptr, nullptr}, RunMode::observe).scores) {
      labeled.push_back({s.raw, s.attacked});
    }
  }
  const auto best = stattest::fit_weights(cal.raw, labeled, weight_grid(), cfg.defense.alpha_bh);
  if (f1) *f1 = best.f1;
  return stattest::make_calibration(cal.raw, cal.seeds, cal.variant, best.weights);
}

Resources ResourceCache::get(const ScenarioConfig& cfg) {
  std::lock_guard<std::mutex> lock(mutex_);
  Resources r;
  const auto& mp = cfg.defense.model_path;
  if (!mp.empty() && uses_temporal(cfg.defense.variant)) {
    auto& slot = models_[mp];
    if (!slot) slot = std::make_unique<temporal::LstmAeModel>(temporal::load_model(mp));
    r.model = slot.get();
  }
  const auto& cp = cfg.defense.calibration_path;
  const Variant v = cfg.defense.variant;
  const bool scored = v == Variant::gcp || v == Variant::gcp_s || v == Variant::gcp_t || v == Variant::baseline;
  if (!cp.empty() && scored) {
    auto& slot = calibrations_[cp];
    if (!slot) slot = std::make_unique<stattest::CalibrationSet>(stattest::load_calibration(cp));
    r.calibration = slot.get();
  }
  return r;
}

}  // namespace bevguard::harness
