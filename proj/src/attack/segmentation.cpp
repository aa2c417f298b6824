#include "bevguard/attack/segmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <tuple>

#include "bevguard/core/error.hpp"

namespace bevguard::attack {

DifferentialDetection differential_detect(const scene::DetectionSet& y_single,
                                          const scene::DetectionSet& y_collab, double match_iou) {
  if (y_single.frame != y_collab.frame) throw InputError("differential_detect: frame mismatch");
  struct Pair {
    double iou;
    std::size_t i;
    std::size_t j;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < y_single.size(); ++i) {
    for (std::size_t j = 0; j < y_collab.size(); ++j) {
      const double v = quad_iou(y_single.boxes[i].corners, y_collab.boxes[j].corners);
      if (v >= match_iou && v > 0.0) pairs.push_back({v, i, j});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.iou > b.iou; });
  std::vector<bool> used_single(y_single.size(), false);
  std::vector<bool> used_collab(y_collab.size(), false);
  for (const auto& p : pairs) {
    if (used_single[p.i] || used_collab[p.j]) continue;
    used_single[p.i] = true;
    used_collab[p.j] = true;
  }
  DifferentialDetection out;
  out.victim = y_single;
  out.non_victim.frame = y_collab.frame;
  out.non_victim.owner = y_collab.owner;
  for (std::size_t j = 0; j < y_collab.size(); ++j) {
    if (!used_collab[j]) out.non_victim.boxes.push_back(y_collab.boxes[j]);
  }
  return out;
}

std::size_t BlindMask::blind_count() const {
  return static_cast<std::size_t>(std::count(cells.data().begin(), cells.data().end(), kBlind));
}

namespace {

struct Offset {
  int dr;
  int dc;
};

// Compass order: E, NE, N, NW, W, SW, S, SE (row axis = +y).
constexpr std::array<Offset, 8> kCompass{{{0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}}};
constexpr std::array<Offset, 4> kAxial{{{0, 1}, {1, 0}, {0, -1}, {-1, 0}}};

double cell_distance(Cell a, Cell b) { return std::hypot(double(a.row - b.row), double(a.col - b.col)); }

}  // namespace

NeighborSelection adaptive_neighbors(Cell s, Cell e, const SegmentationParams& p) {
  if (!p.grid.contains(s.row, s.col) || !p.grid.contains(e.row, e.col)) {
    throw InputError("adaptive_neighbors: cell outside grid");
  }
  const double d_norm = p.grid.diagonal();
  const double dist = cell_distance(s, e);
  int k_s = static_cast<int>(std::ceil(p.k_base * std::exp(-p.gamma_d * dist / d_norm)));
  k_s = std::max(k_s, 1);

  const double ax = s.col - e.col;
  const double ay = s.row - e.row;
  const double an = std::hypot(ax, ay);
  struct Candidate {
    Cell cell;
    bool diagonal;
    double alignment;
    int compass;
  };
  std::vector<Candidate> cands;
  for (int k = 0; k < 8; ++k) {
    const Cell n{s.row + kCompass[k].dr, s.col + kCompass[k].dc};
    if (!p.grid.contains(n.row, n.col)) continue;
    const bool diag = kCompass[k].dr != 0 && kCompass[k].dc != 0;
    const double len = diag ? std::sqrt(2.0) : 1.0;
    const double align = an > 0.0 ? (kCompass[k].dc * ax + kCompass[k].dr * ay) / (len * an) : 0.0;
    cands.push_back({n, diag, align, k});
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return std::tuple(a.diagonal, -a.alignment, a.compass) < std::tuple(b.diagonal, -b.alignment, b.compass);
  });
  NeighborSelection out;
  out.k_s = k_s;
  for (std::size_t i = 0; i < cands.size() && static_cast<int>(i) < k_s; ++i) out.cells.push_back(cands[i].cell);
  return out;
}

Cell victim_grid(const scene::DetectionSet& y_vic, const GridSpec& grid) {
  std::vector<Vec2> centers;
  for (const auto& b : y_vic.boxes) centers.push_back(corners_center(b.corners));
  Cell best{0, 0};
  double best_cost = std::numeric_limits<double>::infinity();
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const Vec2 g = grid.cell_center(r, c);
      double cost = 0.0;
      for (const auto& ctr : centers) cost += distance(g, ctr);
      if (cost < best_cost) {
        best_cost = cost;
        best = {r, c};
      }
    }
  }
  return best;
}

std::vector<Cell> covered_cells(const scene::DetectionBox& box, const GridSpec& grid) {
  double x0 = box.corners[0], x1 = x0, y0 = box.corners[1], y1 = y0;
  for (int k = 1; k < 4; ++k) {
    x0 = std::min(x0, box.corners[2 * k]), x1 = std::max(x1, box.corners[2 * k]);
    y0 = std::min(y0, box.corners[2 * k + 1]), y1 = std::max(y1, box.corners[2 * k + 1]);
  }
  std::vector<Cell> out;
  const int c0 = std::max(0, static_cast<int>(std::floor(x0)));
  const int c1 = std::min(grid.cols - 1, static_cast<int>(std::floor(x1)));
  const int r0 = std::max(0, static_cast<int>(std::floor(y0)));
  const int r1 = std::min(grid.rows - 1, static_cast<int>(std::floor(y1)));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (point_in_quad(box.corners, grid.cell_center(r, c))) out.push_back({r, c});
    }
  }
  const Cell center = cell_of(grid, corners_center(box.corners));
  if (std::find(out.begin(), out.end(), center) == out.end()) out.push_back(center);
  return out;
}

std::optional<BlindMask> segment_blind_regions(const scene::DetectionSet& y_vic,
                                               const scene::DetectionSet& y_nvic,
                                               const SegmentationParams& p) {
  if (y_vic.empty()) return std::nullopt;
  const GridSpec& g = p.grid;
  BlindMask mask{Grid<std::int8_t>(g, kUnlabeled), victim_grid(y_vic, g)};
  auto& labels = mask.cells;
  const Cell e = mask.victim_grid;

  std::vector<Cell> ca;
  std::vector<Cell> ba;
  for (const auto& b : y_vic.boxes) {
    for (Cell c : covered_cells(b, g)) {
      if (labels.at(c.row, c.col) == kUnlabeled) {
        labels.at(c.row, c.col) = kConfident;
        ca.push_back(c);
      }
    }
  }
  if (y_nvic.empty()) {
    Cell far{0, 0};
    double best = -1.0;
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) {
        const double d = cell_distance({r, c}, e);
        if (d > best) {
          best = d;
          far = {r, c};
        }
      }
    }
    if (labels.at(far.row, far.col) == kUnlabeled) {
      labels.at(far.row, far.col) = kBlindGrowing;
      ba.push_back(far);
    }
  } else {
    for (const auto& b : y_nvic.boxes) {
      for (Cell c : covered_cells(b, g)) {
        if (labels.at(c.row, c.col) == kUnlabeled) {
          labels.at(c.row, c.col) = kBlindGrowing;
          ba.push_back(c);
        }
      }
    }
  }

  // One pass expands every frontier cell of one region. A diagonal step is skipped when both
  // cells it cuts past already belong to the other region, which keeps regions 4-connected.
  auto grow = [&](const std::vector<Cell>& frontier, std::int8_t label) {
    std::vector<Cell> next;
    const std::int8_t other = label == kConfident ? kBlindGrowing : kConfident;
    for (Cell s : frontier) {
      for (Cell j : adaptive_neighbors(s, e, p).cells) {
        if (labels.at(j.row, j.col) != kUnlabeled) continue;
        if (j.row != s.row && j.col != s.col && labels.at(s.row, j.col) == other &&
            labels.at(j.row, s.col) == other) {
          continue;
        }
        labels.at(j.row, j.col) = label;
        next.push_back(j);
      }
    }
    return next;
  };
  while (!ca.empty() || !ba.empty()) {
    ca = grow(ca, kConfident);  // confident area first: it wins cells reached in the same sweep
    ba = grow(ba, kBlindGrowing);
  }

  // Sparse neighbor sets (K_s < 4) can strand cells; finish with plain 4-neighborhood sweeps.
  auto stranded_frontier = [&](std::int8_t label) {
    std::vector<Cell> f;
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) {
        if (labels.at(r, c) != label) continue;
        for (auto o : kAxial) {
          const int rr = r + o.dr, cc = c + o.dc;
          if (g.contains(rr, cc) && labels.at(rr, cc) == kUnlabeled) {
            f.push_back({r, c});
            break;
          }
        }
      }
    }
    return f;
  };
  auto grow_axial = [&](const std::vector<Cell>& frontier, std::int8_t label) {
    std::vector<Cell> next;
    for (Cell s : frontier) {
      for (auto o : kAxial) {
        const Cell j{s.row + o.dr, s.col + o.dc};
        if (!g.contains(j.row, j.col) || labels.at(j.row, j.col) != kUnlabeled) continue;
        labels.at(j.row, j.col) = label;
        next.push_back(j);
      }
    }
    return next;
  };
  ca = stranded_frontier(kConfident);
  ba = stranded_frontier(kBlindGrowing);
  while (!ca.empty() || !ba.empty()) {
    ca = grow_axial(ca, kConfident);
    ba = grow_axial(ba, kBlindGrowing);
  }

  for (auto& v : labels.data()) {
    if (v == kBlindGrowing || v == kUnlabeled) v = kBlind;
  }
  return mask;
}

}  // namespace bevguard::attack
