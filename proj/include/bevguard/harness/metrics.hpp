#pragma once

#include <cstdint>
#include <vector>

#include "bevguard/core/geometry.hpp"
#include "bevguard/scene/types.hpp"

namespace bevguard::harness {

struct ScoredBox {
  std::int64_t frame = 0;
  Corners corners{};
  double confidence = 0.0;
};

struct TruthBox {
  std::int64_t frame = 0;
  Corners corners{};
};

/// Average precision: predictions sorted by descending confidence (stable), each greedily
/// matched to the highest-IoU unmatched ground-truth box of its frame at IoU >= iou_thresh,
/// then the area under the monotone precision envelope over all recall points. Returns 0
/// when there are no ground-truth boxes or no predictions.
double ap_at_iou(const std::vector<ScoredBox>& predictions, const std::vector<TruthBox>& truth, double iou_thresh);

/// Accumulates frames of predictions and ground truth for dataset-level AP.
class ApAccumulator {
 public:
  void add_frame(const scene::DetectionSet& predictions, const scene::DetectionSet& truth);
  double ap(double iou_thresh) const { return ap_at_iou(preds_, truth_, iou_thresh); }

 private:
  std::vector<ScoredBox> preds_;
  std::vector<TruthBox> truth_;
};

/// Attacker-detection confusion counts over (frame, collaborator) decisions.
struct DetectionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double fdp_sum = 0.0;  // sum over frames of false rejections / max(rejections, 1)
  std::size_t frames = 0;

  void add_frame(const std::vector<bool>& malicious, const std::vector<bool>& rejected);
  double precision() const;
  double recall() const;
  double f1() const;
  double fdr() const { return frames ? fdp_sum / static_cast<double>(frames) : 0.0; }
};

}  // namespace bevguard::harness
