#include "bevguard/temporal/flow.hpp"

#include <algorithm>

#include "bevguard/core/error.hpp"

namespace bevguard::temporal {

void TemporalConfig::validate() const {
  if (k_hist < 1) throw ConfigError("k_hist must be >= 1");
  if (l_interp < 0) throw ConfigError("l_interp must be >= 0");
  if (kappa_p < 0.0) throw ConfigError("kappa_p must be >= 0");
  if (phi < 0.0) throw ConfigError("phi must be >= 0");
  if (tau <= 0.0) throw ConfigError("tau must be > 0");
}

const char* to_string(FrameFlag f) {
  switch (f) {
    case FrameFlag::observed:
      return "observed";
    case FrameFlag::interpolated:
      return "interpolated";
    case FrameFlag::missing:
      return "missing";
  }
  return "?";
}

bool BevFlow::touched() const { return std::any_of(forged.begin(), forged.end(), [](auto v) { return v != 0; }); }

FlowCache::FlowCache(const TemporalConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

void FlowCache::push(scene::DetectionSet set, FrameFlag flag) {
  if (!frames_.empty() && set.frame <= frames_.back().set.frame) {
    throw InputError("FlowCache: frames must be pushed in increasing order");
  }
  frames_.push_back({std::move(set), flag});
  while (static_cast<int>(frames_.size()) > cfg_.k_hist) frames_.pop_front();
  const std::int64_t oldest = frames_.front().set.frame;
  std::erase_if(links_, [&](const auto& kv) { return kv.first.first <= oldest; });
}

void FlowCache::push_observed(scene::DetectionSet set) {
  push(std::move(set), FrameFlag::observed);
  consecutive_ = 0;
}

void FlowCache::push_interpolated(scene::DetectionSet set) {
  if (consecutive_ >= cfg_.l_interp) throw InputError("FlowCache: interpolation limit reached");
  push(std::move(set), FrameFlag::interpolated);
  ++consecutive_;
}

void FlowCache::flush() {
  frames_.clear();
  links_.clear();
  consecutive_ = 0;
  ++flushes_;
}

ChainLink best_link(const scene::DetectionBox& curr, const scene::DetectionSet& frame, double phi) {
  ChainLink best;
  for (std::size_t b = 0; b < frame.size(); ++b) {
    const double v = quad_iou(curr.corners, frame.boxes[b].corners);
    if (best.target < 0 || v > best.iou) {
      best.target = static_cast<int>(b);
      best.iou = v;
    }
  }
  if (best.target >= 0) {
    const auto& b = frame.boxes[best.target];
    best.cost = std::max(0.0, curr.class_posterior - b.class_posterior) + phi * (1.0 - best.iou);
  }
  return best;
}

ChainLink FlowCache::link(std::size_t j, int box) {
  if (j + 1 >= frames_.size()) throw InputError("FlowCache::link: no older frame");
  const auto& src = from_newest(j);
  const auto key = std::make_pair(src.set.frame, box);
  if (auto it = links_.find(key); it != links_.end()) return it->second;
  ++link_evaluations_;
  const ChainLink l = best_link(src.set.boxes.at(static_cast<std::size_t>(box)), from_newest(j + 1).set, cfg_.phi);
  links_.emplace(key, l);
  return l;
}

scene::DetectionSet select_low_confidence(const scene::DetectionSet& y_fused, const scene::DetectionSet& y_ego,
                                          const scene::ConfidenceMap& c_map, const TemporalConfig& cfg) {
  scene::DetectionSet out;
  out.frame = y_fused.frame;
  out.owner = y_fused.owner;
  for (const auto& b : y_fused.boxes) {
    bool low = c_map.at(corners_center(b.corners)) < cfg.conf_low;
    if (!low) {
      double best = 0.0;
      for (const auto& e : y_ego.boxes) best = std::max(best, quad_iou(b.corners, e.corners));
      low = best < cfg.unseen_iou;
    }
    if (low) out.boxes.push_back(b);
  }
  return out;
}

namespace {

void append_step(BevFlow& f, const scene::DetectionBox& b, std::int64_t frame, FrameFlag flag) {
  f.boxes.push_back(b.corners);
  f.provenance.push_back(flag);
  f.frames.push_back(frame);
  f.forged.push_back(b.forged ? 1 : 0);
}

void reverse_flow(BevFlow& f) {
  std::reverse(f.boxes.begin(), f.boxes.end());
  std::reverse(f.provenance.begin(), f.provenance.end());
  std::reverse(f.frames.begin(), f.frames.end());
  std::reverse(f.forged.begin(), f.forged.end());
}

}  // namespace

FlowSets bfm_chain_match(const scene::DetectionSet& o_set, FlowCache& cache) {
  FlowSets out;
  if (o_set.empty()) return out;
  const TemporalConfig& cfg = cache.config();
  const std::size_t depth = std::min<std::size_t>(cache.size(), static_cast<std::size_t>(cfg.k_hist));
  for (const auto& head : o_set.boxes) {
    BevFlow flow;
    flow.head_confidence = head.confidence;
    append_step(flow, head, o_set.frame, FrameFlag::observed);
    bool matched = depth >= static_cast<std::size_t>(cfg.k_hist);
    int curr = -1;  // index in the previous cached frame; -1 while at the head
    for (std::size_t j = 0; j < depth; ++j) {
      ChainLink l = curr < 0 ? best_link(head, cache.from_newest(0).set, cfg.phi) : cache.link(j - 1, curr);
      if (l.target < 0 || !(l.cost < cfg.tau)) {
        matched = false;
        break;
      }
      const auto& frame = cache.from_newest(j);
      append_step(flow, frame.set.boxes[static_cast<std::size_t>(l.target)], frame.set.frame, frame.flag);
      curr = l.target;
    }
    reverse_flow(flow);
    (matched ? out.candidates : out.unmatched).push_back(std::move(flow));
  }
  return out;
}

}  // namespace bevguard::temporal
