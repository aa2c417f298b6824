#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bevguard/core/grid.hpp"
#include "bevguard/scene/types.hpp"

namespace bevguard::attack {

struct DifferentialDetection {
  scene::DetectionSet victim;      // boxes the victim detects alone
  scene::DetectionSet non_victim;  // collaborative boxes the victim misses
};

/// Splits collaborative detections into victim-seen and victim-missed sets. Matching is
/// one-to-one, greedy by descending IoU, accepting pairs with IoU >= match_iou.
DifferentialDetection differential_detect(const scene::DetectionSet& y_single,
                                          const scene::DetectionSet& y_collab, double match_iou);

struct SegmentationParams {
  int k_base = 6;
  double gamma_d = 0.3;
  GridSpec grid{};
};

/// Label values while growing; the finalized mask only holds kConfident / kBlind.
inline constexpr std::int8_t kConfident = 1;
inline constexpr std::int8_t kBlind = 0;
inline constexpr std::int8_t kBlindGrowing = -1;
inline constexpr std::int8_t kUnlabeled = 0;

struct BlindMask {
  Grid<std::int8_t> cells;
  Cell victim_grid;

  bool blind(int row, int col) const { return cells.at(row, col) == kBlind; }
  std::size_t blind_count() const;
};

struct NeighborSelection {
  int k_s = 0;
  std::vector<Cell> cells;
};

/// K_s = ceil(K_base * exp(-gamma_d * Dist(s, e) / D_norm)) neighbors of s. Candidates are the
/// in-grid 8-neighborhood ordered nearest-first (axial before diagonal), then by how well the
/// step points away from e, then by a fixed compass order.
NeighborSelection adaptive_neighbors(Cell s, Cell e, const SegmentationParams& p);

/// Cell minimizing the summed distance to the centers of the given boxes.
Cell victim_grid(const scene::DetectionSet& y_vic, const GridSpec& grid);

/// Cells whose centers fall inside the box, plus the cell holding the box center.
std::vector<Cell> covered_cells(const scene::DetectionBox& box, const GridSpec& grid);

/// Blind region segmentation by dual-queue region growth. Returns nullopt when the victim
/// set is empty (no anchor for the victim grid).
std::optional<BlindMask> segment_blind_regions(const scene::DetectionSet& y_vic,
                                               const scene::DetectionSet& y_nvic,
                                               const SegmentationParams& p);

}  // namespace bevguard::attack
