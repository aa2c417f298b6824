#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bevguard/harness/config.hpp"
#include "bevguard/harness/metrics.hpp"
#include "bevguard/stattest/stattest.hpp"
#include "bevguard/temporal/flow.hpp"
#include "bevguard/temporal/lstm_ae.hpp"

namespace bevguard::harness {

/// evaluate: full defense with quarantine. observe: every score is computed and traced but no
/// agent is ever rejected (calibration and score studies).
enum class RunMode { evaluate, observe };

struct Resources {
  const temporal::LstmAeModel* model = nullptr;
  const stattest::CalibrationSet* calibration = nullptr;
  /// When set, complete flows over every fused box are appended here (flow dataset building).
  std::vector<temporal::BevFlow>* flow_sink = nullptr;
};

struct ScoreRecord {
  std::int64_t frame = 0;
  int agent = -1;
  stattest::RawScore raw;
  bool attacked = false;
};

struct FlowStats {
  double touched_ltr_sum = 0.0;
  std::size_t touched_count = 0;
  double clean_ltr_sum = 0.0;
  std::size_t clean_count = 0;
  std::size_t unmatched_attacked = 0;
  std::size_t scored_attacked = 0;  // temporal scorings of attacked messages
  std::size_t unmatched_clean = 0;
  std::size_t scored_clean = 0;

  double touched_mean() const { return touched_count ? touched_ltr_sum / static_cast<double>(touched_count) : 0.0; }
  double clean_mean() const { return clean_count ? clean_ltr_sum / static_cast<double>(clean_count) : 0.0; }
  double unmatched_attacked_mean() const;
  double unmatched_clean_mean() const;
};

struct EvalReport {
  std::string variant;
  std::string attack;
  std::uint64_t seed = 0;
  int frames = 0;
  double ap50 = 0.0;
  double ap70 = 0.0;
  DetectionCounts detection;
  double throughput_fps = 0.0;  // wall clock, never written to the trace
  std::size_t attacked_messages = 0;
  std::size_t quarantines = 0;
  std::size_t interpolations = 0;
  std::size_t flushes = 0;
  FlowStats flows;
  std::vector<ScoreRecord> scores;

  nlohmann::json summary() const;
};

/// Runs one scenario. Temporal variants need resources.model; conformal and threshold
/// variants need resources.calibration in evaluate mode. Throws ConfigError otherwise.
EvalReport run_scenario(const ScenarioConfig& cfg, const Resources& resources, RunMode mode,
                        std::ostream* trace = nullptr);

/// Agent positions (meters), ego first in id order; deterministic in the seed.
std::vector<Vec2> place_agents(const ScenarioConfig& cfg);

/// Designated attackers drawn from the non-ego agents.
std::vector<int> choose_attackers(const ScenarioConfig& cfg);

}  // namespace bevguard::harness
