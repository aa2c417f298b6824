#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "bevguard/harness/config.hpp"
#include "bevguard/harness/scenario.hpp"
#include "bevguard/stattest/stattest.hpp"
#include "bevguard/temporal/flow.hpp"
#include "bevguard/temporal/lstm_ae.hpp"

namespace bevguard::harness {

struct FlowDataset {
  std::vector<temporal::BevFlow> train, val, test;
  std::size_t train_scenarios = 0, val_scenarios = 0, test_scenarios = 0;
};

/// Scenario counts of the 8:1:1 split.
struct SplitSizes {
  std::size_t train, val, test;
};
SplitSizes split_sizes(std::size_t n_scenarios);

/// Seed of the s-th scenario derived from a base seed.
std::uint64_t scenario_seed(std::uint64_t base, std::uint64_t s);

/// Complete flows from attack-free runs, split 8:1:1 by scenario. Throws ConfigError for
/// n_scenarios = 0.
FlowDataset build_flow_dataset(const ScenarioConfig& cfg, std::size_t n_scenarios, std::uint64_t seed);

void write_flows_jsonl(const std::vector<temporal::BevFlow>& flows, const std::string& split, std::ostream& out);
/// Reads every flow line, or only those of one split when `split` is non-empty.
std::vector<temporal::BevFlow> read_flows_jsonl(std::istream& in, const std::string& split = "");
void save_flow_dataset(const FlowDataset& ds, const std::string& path);
FlowDataset load_flow_dataset(const std::string& path);

/// Trains an LSTM-AE on the training split.
temporal::LstmAeModel train_model(const FlowDataset& ds, const ScenarioConfig& cfg, const temporal::TrainConfig& train);

/// Attack-free observe runs over the given seeds; every collaborator score becomes a
/// calibration sample.
stattest::CalibrationSet build_calibration(const ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                           const Resources& resources);

/// Seeds base, base + 1, ..., base + n - 1.
std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t n);

/// Omega grid {0, 0.25, 0.5, 1, 2}^2 without the all-zero pair, (1, 1) first.
std::vector<stattest::ScoreWeights> weight_grid();

/// Refits the calibration weights on a labeled batch of attacked observe runs over `seeds`,
/// which must be disjoint from the calibration seeds.
stattest::CalibrationSet fit_calibration_weights(const ScenarioConfig& cfg, const stattest::CalibrationSet& cal,
                                                 const std::vector<std::uint64_t>& seeds, const Resources& resources,
                                                 double* f1 = nullptr);

/// Loads and caches the model and calibration files named in a config; thread-safe.
class ResourceCache {
 public:
  Resources get(const ScenarioConfig& cfg);

 private:
  std::mutex mutex_;
  std::map<std::string, std::unique_ptr<temporal::LstmAeModel>> models_;
  std::map<std::string, std::unique_ptr<stattest::CalibrationSet>> calibrations_;
};

}  // namespace bevguard::harness
