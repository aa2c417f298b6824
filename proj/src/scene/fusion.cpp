#include "bevguard/scene/fusion.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "bevguard/core/error.hpp"

namespace bevguard::scene {

DetectionSet fuse_late(const DetectionSet& ego, std::span<const DetectionSet> received, double nms_iou) {
  struct Entry {
    const DetectionBox* box;
    bool from_ego;
    std::size_t order;
  };
  std::vector<Entry> pool;
  std::size_t order = 0;
  for (const auto& b : ego.boxes) pool.push_back({&b, true, order++});
  for (const auto& set : received) {
    if (set.frame != ego.frame) {
      throw InputError("fuse_late: frame mismatch (ego " + std::to_string(ego.frame) + ", received " +
                       std::to_string(set.frame) + ")");
    }
    for (const auto& b : set.boxes) pool.push_back({&b, false, order++});
  }
  std::stable_sort(pool.begin(), pool.end(), [](const Entry& a, const Entry& b) {
    if (a.box->confidence != b.box->confidence) return a.box->confidence > b.box->confidence;
    if (a.from_ego != b.from_ego) return a.from_ego;
    return a.order < b.order;
  });

  DetectionSet out;
  out.frame = ego.frame;
  out.owner = ego.owner;
  for (const auto& e : pool) {
    const bool suppressed = std::any_of(out.boxes.begin(), out.boxes.end(), [&](const DetectionBox& kept) {
      return quad_iou(kept.corners, e.box->corners) > nms_iou;
    });
    if (!suppressed) out.boxes.push_back(*e.box);
  }
  return out;
}

}  // namespace bevguard::scene
