#pragma once

#include <string>
#include <vector>

#include "bevguard/scene/types.hpp"

namespace bevguard::spatial {

struct MatchCostParams {
  double phi = 1.0;
  std::vector<std::string> classes{"vehicle"};
};

inline constexpr int kPad = -1;

struct MatchPair {
  int ego = kPad;
  int collab = kPad;
  double cost = 0.0;
};

struct Matching {
  std::vector<MatchPair> pairs;
  double total_cost = 0.0;
};

struct SpatialScore {
  double l_csc = 0.0;
  std::vector<double> per_pair_terms;
  double alpha = 0.0;
  Matching matching;
};

double iou(const scene::DetectionBox& a, const scene::DetectionBox& b);

/// ReLU(p1 - p2) + phi * (1 - IoU). A padded side costs p + phi of the real box.
double match_cost(const scene::DetectionBox& y1, const scene::DetectionBox& y2, const MatchCostParams& params);
double pad_cost(const scene::DetectionBox& real, const MatchCostParams& params);

/// Minimum-cost assignment of a square cost matrix (row-major, n x n). Returns the column
/// assigned to each row.
std::vector<int> solve_assignment(const std::vector<double>& cost, int n);

/// Kuhn-Munkres matching of ego vs collaborative boxes, padding the smaller set.
Matching optimal_match(const scene::DetectionSet& y_e, const scene::DetectionSet& y_ei,
                       const MatchCostParams& params);

/// Confidence-scaled spatial concordance loss. Each pair is weighted by the ego confidence in
/// the cell of its ego box (or of the collaborator box when the ego side is padded), divided by
/// the summed confidence map. Throws NumericalError when the map sums to zero.
SpatialScore csc_loss(const scene::DetectionSet& y_e, const scene::DetectionSet& y_ei,
                      const scene::ConfidenceMap& c_map, const MatchCostParams& params);

}  // namespace bevguard::spatial
