#include "bevguard/spatial/consistency.hpp"

#include <algorithm>
#include <limits>

#include "bevguard/core/error.hpp"

namespace bevguard::spatial {

double iou(const scene::DetectionBox& a, const scene::DetectionBox& b) { return quad_iou(a.corners, b.corners); }

double match_cost(const scene::DetectionBox& y1, const scene::DetectionBox& y2, const MatchCostParams& params) {
  return std::max(0.0, y1.class_posterior - y2.class_posterior) + params.phi * (1.0 - iou(y1, y2));
}

double pad_cost(const scene::DetectionBox& real, const MatchCostParams& params) {
  return real.class_posterior + params.phi;
}

std::vector<int> solve_assignment(const std::vector<double>& cost, int n) {
  if (n == 0) return {};
  if (cost.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
    throw InputError("solve_assignment: cost matrix size mismatch");
  }
  // Shortest augmenting path with row/column potentials, 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

Matching optimal_match(const scene::DetectionSet& y_e, const scene::DetectionSet& y_ei,
                       const MatchCostParams& params) {
  const int ne = static_cast<int>(y_e.size());
  const int nc = static_cast<int>(y_ei.size());
  const int n = std::max(ne, nc);
  std::vector<double> cost(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double c = 0.0;
      if (i < ne && j < nc) {
        c = match_cost(y_e.boxes[i], y_ei.boxes[j], params);
      } else if (i < ne) {
        c = pad_cost(y_e.boxes[i], params);
      } else if (j < nc) {
        c = pad_cost(y_ei.boxes[j], params);
      }
      cost[static_cast<std::size_t>(i) * n + j] = c;
    }
  }
  const auto assign = solve_assignment(cost, n);
  Matching m;
  for (int i = 0; i < n; ++i) {
    const int j = assign[i];
    MatchPair pair{i < ne ? i : kPad, j < nc ? j : kPad, cost[static_cast<std::size_t>(i) * n + j]};
    m.total_cost += pair.cost;
    m.pairs.push_back(pair);
  }
  return m;
}

SpatialScore csc_loss(const scene::DetectionSet& y_e, const scene::DetectionSet& y_ei,
                      const scene::ConfidenceMap& c_map, const MatchCostParams& params) {
  const double norm = c_map.sum();
  if (!(norm > 0.0)) throw NumericalError("csc_loss: confidence map sums to zero");
  SpatialScore s;
  s.matching = optimal_match(y_e, y_ei, params);
  for (const auto& pair : s.matching.pairs) {
    const auto& anchor = pair.ego != kPad ? y_e.boxes[pair.ego] : y_ei.boxes[pair.collab];
    const double w = c_map.at(corners_center(anchor.corners));
    const double term = pair.cost * w / norm;
    s.per_pair_terms.push_back(term);
    s.l_csc += term;
  }
  return s;
}

}  // namespace bevguard::spatial
