#include "bevguard/stattest/stattest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "bevguard/core/error.hpp"

namespace bevguard::stattest {

void ScoreWeights::validate() const {
  if (omega_s < 0.0 || omega_t < 0.0 || !(omega_s + omega_t > 0.0)) {
    throw ConfigError("score weights must be >= 0 with a positive sum");
  }
}

double combined_score(double l_csc, double l_ta, const ScoreWeights& w) { return w.omega_s * l_csc + w.omega_t * l_ta; }

namespace {

double scale(double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : v - lo; }

}  // namespace

double ScoreNormalizer::csc(double v) const { return scale(v, csc_min, csc_max); }
double ScoreNormalizer::ta(double v) const { return scale(v, ta_min, ta_max); }

ScoreNormalizer fit_normalizer(const std::vector<RawScore>& raw) {
  ScoreNormalizer n;
  bool any_csc = false, any_ta = false;
  for (const auto& r : raw) {
    if (!any_csc) {
      n.csc_min = n.csc_max = r.l_csc;
      any_csc = true;
    }
    n.csc_min = std::min(n.csc_min, r.l_csc);
    n.csc_max = std::max(n.csc_max, r.l_csc);
    if (!r.temporal) continue;
    if (!any_ta) {
      n.ta_min = n.ta_max = r.l_ta;
      any_ta = true;
    }
    n.ta_min = std::min(n.ta_min, r.l_ta);
    n.ta_max = std::max(n.ta_max, r.l_ta);
  }
  return n;
}

double st_score(const RawScore& raw, const ScoreNormalizer& norm, const ScoreWeights& w) {
  return combined_score(norm.csc(raw.l_csc), raw.temporal ? norm.ta(raw.l_ta) : 0.0, w);
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw InputError("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

CalibrationSet make_calibration(std::vector<RawScore> raw, std::vector<std::uint64_t> seeds, std::string variant,
                                const ScoreWeights& w) {
  if (raw.empty()) throw ConfigError("calibration set is empty");
  w.validate();
  CalibrationSet cal;
  cal.weights = w;
  cal.normalizer = fit_normalizer(raw);
  std::vector<double> csc;
  for (const auto& r : raw) {
    cal.scores.push_back(st_score(r, cal.normalizer, w));
    csc.push_back(r.l_csc);
  }
  std::sort(cal.scores.begin(), cal.scores.end());
  cal.alpha_spatial = quantile(csc, 0.95);
  cal.raw = std::move(raw);
  cal.seeds = std::move(seeds);
  cal.variant = std::move(variant);
  return cal;
}

double conformal_p(double score, const std::vector<double>& sorted) {
  if (sorted.empty()) throw InputError("conformal_p: empty calibration set");
  const auto at_least = static_cast<double>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), score));
  return (1.0 + at_least) / (1.0 + static_cast<double>(sorted.size()));
}

double conformal_p(double score, const CalibrationSet& cal) { return conformal_p(score, cal.scores); }

BhResult bh_select(const std::vector<double>& p, double alpha_bh) {
  BhResult r;
  r.rejected.assign(p.size(), false);
  if (p.empty()) return r;
  std::vector<double> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  const double m = static_cast<double>(p.size());
  for (std::size_t j = sorted.size(); j >= 1; --j) {
    if (sorted[j - 1] <= static_cast<double>(j) / m * alpha_bh) {
      r.cutoff = j;
      r.threshold = sorted[j - 1];
      break;
    }
  }
  if (r.cutoff == 0) return r;
  for (std::size_t i = 0; i < p.size(); ++i) r.rejected[i] = p[i] <= r.threshold;
  return r;
}

bool TrustState::quarantined(int agent, std::int64_t frame) const {
  const auto it = quarantined_frame.find(agent);
  return it != quarantined_frame.end() && it->second == frame;
}

TrustState update_trust(TrustState state, const AnomalyVerdict& verdict) {
  for (const auto& a : verdict.agents) {
    if (!a.rejected) continue;
    if (state.quarantined(a.agent, verdict.frame)) continue;
    state.quarantined_frame[a.agent] = verdict.frame;
    state.log.push_back({verdict.frame, a.agent});
  }
  return state;
}

WeightFit fit_weights(const std::vector<RawScore>& calibration, const std::vector<LabeledScore>& validation,
                      const std::vector<ScoreWeights>& grid, double alpha) {
  if (grid.empty()) throw ConfigError("fit_weights: empty weight grid");
  if (calibration.empty()) throw ConfigError("fit_weights: empty calibration set");
  WeightFit best;
  best.f1 = -1.0;
  for (const auto& w : grid) {
    const CalibrationSet cal = make_calibration(calibration, {}, "", w);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& v : validation) {
      const bool flagged = conformal_p(st_score(v.raw, cal.normalizer, w), cal) <= alpha;
      tp += flagged && v.malicious;
      fp += flagged && !v.malicious;
      fn += !flagged && v.malicious;
    }
    const double denom = static_cast<double>(2 * tp + fp + fn);
    const double f1 = denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
    if (f1 > best.f1) best = {w, f1};
  }
  return best;
}

namespace {

using nlohmann::json;
constexpr const char* kCalibrationSchema = "bevguard.calibration/1";

}  // namespace

void save_calibration(const CalibrationSet& cal, const std::string& path) {
  json j;
  j["schema"] = kCalibrationSchema;
  j["variant"] = cal.variant;
  j["seeds"] = cal.seeds;
  j["weights"] = {{"omega_s", cal.weights.omega_s}, {"omega_t", cal.weights.omega_t}};
  j["normalizer"] = {{"csc_min", cal.normalizer.csc_min},
                     {"csc_max", cal.normalizer.csc_max},
                     {"ta_min", cal.normalizer.ta_min},
                     {"ta_max", cal.normalizer.ta_max}};
  j["alpha_spatial"] = cal.alpha_spatial;
  j["scores"] = cal.scores;
  json raw = json::array();
  for (const auto& r : cal.raw) raw.push_back({r.l_csc, r.l_ta, r.temporal});
  j["raw"] = raw;
  std::ofstream out(path);
  if (!out) throw InputError("cannot write calibration file " + path);
  out << j.dump() << '\n';
}

CalibrationSet load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read calibration file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("calibration file " + path + ": " + e.what());
  }
  if (j.value("schema", "") != kCalibrationSchema) throw InputError("calibration file " + path + ": unsupported schema");
  CalibrationSet cal;
  cal.variant = j.at("variant").get<std::string>();
  cal.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  cal.weights = {j.at("weights").at("omega_s").get<double>(), j.at("weights").at("omega_t").get<double>()};
  const auto& n = j.at("normalizer");
  cal.normalizer = {n.at("csc_min").get<double>(), n.at("csc_max").get<double>(), n.at("ta_min").get<double>(),
                    n.at("ta_max").get<double>()};
  cal.alpha_spatial = j.at("alpha_spatial").get<double>();
  cal.scores = j.at("scores").get<std::vector<double>>();
  for (const auto& r : j.at("raw")) cal.raw.push_back({r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<bool>()});
  if (cal.scores.empty()) throw InputError("calibration file " + path + ": no scores");
  if (!std::is_sorted(cal.scores.begin(), cal.scores.end())) {
    throw InputError("calibration file " + path + ": scores not sorted");
  }
  return cal;
}

}  // namespace bevguard::stattest
