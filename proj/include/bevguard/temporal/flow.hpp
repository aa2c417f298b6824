#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "bevguard/scene/types.hpp"
#include "bevguard/temporal/config.hpp"

namespace bevguard::temporal {

enum class FrameFlag { observed, interpolated, missing };

const char* to_string(FrameFlag f);

/// One box trajectory, oldest step first. Complete flows hold K+1 steps.
struct BevFlow {
  std::vector<Corners> boxes;
  std::vector<FrameFlag> provenance;
  std::vector<std::int64_t> frames;
  std::vector<std::uint8_t> forged;  // simulator bookkeeping, per step
  double head_confidence = 0.0;

  std::size_t length() const { return boxes.size(); }
  bool touched() const;
};

struct FlowSets {
  std::vector<BevFlow> candidates;
  std::vector<BevFlow> unmatched;
};

struct CachedFrame {
  scene::DetectionSet set;
  FrameFlag flag = FrameFlag::observed;
};

/// Best backward link of one box into the previous cached frame.
struct ChainLink {
  int target = -1;  // index in the previous frame, -1 when that frame is empty
  double iou = 0.0;
  double cost = 0.0;
};

/// Per-collaborator ring buffer of the last K fused frames plus memoized chain links.
class FlowCache {
 public:
  explicit FlowCache(const TemporalConfig& cfg);

  void push_observed(scene::DetectionSet set);
  void push_interpolated(scene::DetectionSet set);
  void flush();

  bool ready() const { return static_cast<int>(frames_.size()) >= cfg_.k_hist; }
  bool empty() const { return frames_.empty(); }
  std::size_t size() const { return frames_.size(); }
  /// j = 0 is the newest cached frame.
  const CachedFrame& from_newest(std::size_t j) const { return frames_[frames_.size() - 1 - j]; }
  const std::deque<CachedFrame>& frames() const { return frames_; }
  int consecutive_interpolations() const { return consecutive_; }
  int flush_count() const { return flushes_; }
  const TemporalConfig& config() const { return cfg_; }

  /// Link from box `box` of cached frame `j` (0 = newest) into frame j + 1, memoized.
  ChainLink link(std::size_t j, int box);
  std::size_t link_evaluations() const { return link_evaluations_; }

 private:
  void push(scene::DetectionSet set, FrameFlag flag);

  TemporalConfig cfg_;
  std::deque<CachedFrame> frames_;
  int consecutive_ = 0;
  int flushes_ = 0;
  std::map<std::pair<std::int64_t, int>, ChainLink> links_;
  std::size_t link_evaluations_ = 0;
};

/// Argmax-IoU box of `frame` for `curr`, with the chain cost ReLU(p_curr - p_b) + phi (1 - IoU).
ChainLink best_link(const scene::DetectionBox& curr, const scene::DetectionSet& frame, double phi);

/// Low-confidence set O: fused boxes in cells where ego confidence < conf_low, plus fused boxes
/// no ego box overlaps with IoU >= unseen_iou.
scene::DetectionSet select_low_confidence(const scene::DetectionSet& y_fused, const scene::DetectionSet& y_ego,
                                          const scene::ConfidenceMap& c_map, const TemporalConfig& cfg);

/// Chain-based flow matching of each head against the K cached frames, newest first. A head
/// whose chain breaks (IoU-best box fails cost < tau, or an empty frame) goes to the unmatched
/// set with the partial chain. No backtracking to second-best candidates.
FlowSets bfm_chain_match(const scene::DetectionSet& o_set, FlowCache& cache);

enum class GapOutcome { interpolated, flushed, skipped };

}  // namespace bevguard::temporal
