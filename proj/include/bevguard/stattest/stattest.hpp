#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace bevguard::stattest {

struct ScoreWeights {
  double omega_s = 1.0;
  double omega_t = 1.0;

  void validate() const;
};

/// L_ST = omega_s * L_csc + omega_t * L_ta.
double combined_score(double l_csc, double l_ta, const ScoreWeights& w);

/// Min-max scaling of the raw spatial and temporal scores by calibration statistics.
struct ScoreNormalizer {
  double csc_min = 0.0;
  double csc_max = 1.0;
  double ta_min = 0.0;
  double ta_max = 1.0;

  double csc(double v) const;
  double ta(double v) const;
};

struct RawScore {
  double l_csc = 0.0;
  double l_ta = 0.0;
  bool temporal = false;  // false while the flow cache is still filling (spatial only)
};

ScoreNormalizer fit_normalizer(const std::vector<RawScore>& raw);

/// Normalized combined score; the temporal term is dropped while the cache is filling.
double st_score(const RawScore& raw, const ScoreNormalizer& norm, const ScoreWeights& w);

struct CalibrationSet {
  std::vector<double> scores;  // ascending
  std::vector<std::uint64_t> seeds;
  std::string variant;
  ScoreWeights weights;
  ScoreNormalizer normalizer;
  std::vector<RawScore> raw;
  double alpha_spatial = 0.0;  // 95th percentile of raw L_csc

  std::size_t size() const { return scores.size(); }
};

/// Builds the sorted score list from raw components. Throws ConfigError when empty.
CalibrationSet make_calibration(std::vector<RawScore> raw, std::vector<std::uint64_t> seeds, std::string variant,
                                const ScoreWeights& w);

/// p = (1 + #{s in S : s >= score}) / (1 + |S|).
double conformal_p(double score, const CalibrationSet& cal);
double conformal_p(double score, const std::vector<double>& sorted_scores);

/// Empirical quantile (linear interpolation between order statistics).
double quantile(std::vector<double> v, double q);

struct BhResult {
  std::vector<bool> rejected;
  std::size_t cutoff = 0;  // j (1-based); 0 when nothing is rejected
  double threshold = 0.0;  // p_(j), or 0 when nothing is rejected
};

/// Benjamini-Hochberg step-up rule at level alpha_bh.
BhResult bh_select(const std::vector<double>& p_values, double alpha_bh);

struct AgentVerdict {
  int agent = -1;
  double l_csc = 0.0;
  double l_ta = 0.0;
  double l_st = 0.0;
  double p_value = 1.0;
  bool temporal = false;
  bool rejected = false;
};

struct AnomalyVerdict {
  std::int64_t frame = 0;
  std::vector<AgentVerdict> agents;
  std::size_t cutoff = 0;
  double alpha_bh = 0.1;
};

struct Detection {
  std::int64_t frame = 0;
  int agent = -1;
};

struct TrustState {
  std::map<int, std::int64_t> quarantined_frame;  // agent -> frame of the latest rejection
  std::vector<Detection> log;

  bool quarantined(int agent, std::int64_t frame) const;
};

/// Quarantines rejected agents for the verdict frame only; the exclusion lifts at frame + 1.
TrustState update_trust(TrustState state, const AnomalyVerdict& verdict);

struct LabeledScore {
  RawScore raw;
  bool malicious = false;
};

struct WeightFit {
  ScoreWeights weights;
  double f1 = 0.0;
};

/// Grid search over omega pairs maximizing detection F1 of the single conformal test p <= alpha
/// on a labeled validation batch. Ties keep the earliest grid entry.
WeightFit fit_weights(const std::vector<RawScore>& calibration, const std::vector<LabeledScore>& validation,
                      const std::vector<ScoreWeights>& grid, double alpha);

void save_calibration(const CalibrationSet& cal, const std::string& path);
CalibrationSet load_calibration(const std::string& path);

}  // namespace bevguard::stattest
