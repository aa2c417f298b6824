#include "bevguard/harness/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "bevguard/core/error.hpp"

namespace bevguard::harness {

double ap_at_iou(const std::vector<ScoredBox>& predictions, const std::vector<TruthBox>& truth, double iou_thresh) {
  if (truth.empty() || predictions.empty()) return 0.0;
  std::map<std::int64_t, std::vector<std::size_t>> by_frame;
  for (std::size_t i = 0; i < truth.size(); ++i) by_frame[truth[i].frame].push_back(i);
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return predictions[a].confidence > predictions[b].confidence; });
  std::vector<bool> used(truth.size(), false);
  std::vector<double> precision, recall;
  std::size_t tp = 0, fp = 0;
  for (std::size_t k : order) {
    const auto& p = predictions[k];
    double best = -1.0;
    std::size_t best_idx = 0;
    if (auto it = by_frame.find(p.frame); it != by_frame.end()) {
      for (std::size_t g : it->second) {
        if (used[g]) continue;
        const double v = quad_iou(p.corners, truth[g].corners);
        if (v > best) {
          best = v;
          best_idx = g;
        }
      }
    }
    if (best >= iou_thresh) {
      used[best_idx] = true;
      ++tp;
    } else {
      ++fp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(truth.size()));
  }
  for (std::size_t i = precision.size() - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

void ApAccumulator::add_frame(const scene::DetectionSet& predictions, const scene::DetectionSet& truth) {
  for (const auto& b : predictions.boxes) preds_.push_back({predictions.frame, b.corners, b.confidence});
  for (const auto& b : truth.boxes) truth_.push_back({truth.frame, b.corners});
}

void DetectionCounts::add_frame(const std::vector<bool>& malicious, const std::vector<bool>& rejected) {
  if (malicious.size() != rejected.size()) throw InputError("DetectionCounts: label/decision size mismatch");
  std::size_t false_rej = 0, rej = 0;
  for (std::size_t i = 0; i < malicious.size(); ++i) {
    tp += malicious[i] && rejected[i];
    fp += !malicious[i] && rejected[i];
    fn += malicious[i] && !rejected[i];
    tn += !malicious[i] && !rejected[i];
    rej += rejected[i];
    false_rej += !malicious[i] && rejected[i];
  }
  fdp_sum += rej ? static_cast<double>(false_rej) / static_cast<double>(rej) : 0.0;
  ++frames;
}

double DetectionCounts::precision() const {
  return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
}

double DetectionCounts::recall() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }

double DetectionCounts::f1() const {
  const double d = static_cast<double>(2 * tp + fp + fn);
  return d > 0 ? 2.0 * static_cast<double>(tp) / d : 0.0;
}

}  // namespace bevguard::harness
