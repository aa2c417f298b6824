#include "bevguard/attack/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bevguard/attack/occupancy.hpp"
#include "bevguard/core/error.hpp"

namespace bevguard::attack {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double corner_norm(const Corners& d) {
  double s = 0.0;
  for (double v : d) s += v * v;
  return std::sqrt(s);
}

constexpr double kBudgetSlack = 1e-12;

}  // namespace

double edit_cost(const BoxEdit& e, const EditCosts& costs) {
  switch (e.kind) {
    case EditKind::inject:
      return costs.inject;
    case EditKind::drop:
      return costs.drop;
    case EditKind::shift:
      return costs.shift_per_unit * corner_norm(e.delta);
  }
  return 0.0;
}

double plan_input_magnitude(const std::vector<BoxEdit>& edits, const EditCosts& costs) {
  double total = 0.0;
  for (const auto& e : edits) total += edit_cost(e, costs);
  return total;
}

std::vector<double> suppression_weight(const std::vector<double>& dev, double delta_o) {
  std::vector<double> out(dev.size());
  for (std::size_t i = 0; i < dev.size(); ++i) {
    if (dev[i] < 0.0) throw InputError("suppression_weight: negative deviation");
    out[i] = 1.0 - sigmoid(dev[i] - delta_o);
  }
  return out;
}

namespace {

double cell_loss(double occ, double gt, bool blind, bool weighted, const AttackBudget& b) {
  const double dev = std::abs(occ - gt);
  if (!weighted) return dev;
  const double w = b.w_delta * (blind ? 1.0 : 0.0) + (1.0 - sigmoid(dev - b.delta_o));
  return w * dev;
}

}  // namespace

double weighted_loss(const std::vector<double>& occ, const std::vector<double>& gt, const BlindMask* mask,
                     const AttackBudget& budget) {
  if (occ.size() != gt.size()) throw InputError("weighted_loss: size mismatch");
  if (mask && mask->cells.size() != occ.size()) throw InputError("weighted_loss: mask size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    const bool blind = mask && mask->cells[i] == kBlind;
    total += cell_loss(occ[i], gt[i], blind, mask != nullptr, budget);
  }
  return total;
}

scene::DetectionSet apply_plan(const scene::DetectionSet& msg, const PerturbationPlan& plan) {
  std::vector<scene::DetectionBox> boxes = msg.boxes;
  std::vector<bool> alive(boxes.size(), true);
  std::vector<scene::DetectionBox> injected;
  for (const auto& e : plan.edits) {
    if (e.kind == EditKind::inject) {
      auto b = e.box;
      b.forged = true;
      injected.push_back(b);
      continue;
    }
    if (e.box_id < 0 || static_cast<std::size_t>(e.box_id) >= boxes.size() || !alive[e.box_id]) {
      throw InputError("apply_plan: dangling box id " + std::to_string(e.box_id));
    }
    auto& b = boxes[e.box_id];
    if (e.kind == EditKind::drop) {
      alive[e.box_id] = false;
      continue;
    }
    for (int k = 0; k < 8; ++k) b.corners[k] += e.delta[k];
    if (!is_convex_quad(b.corners)) throw InputError("apply_plan: shift breaks box convexity");
    b.forged = true;
  }
  scene::DetectionSet out;
  out.frame = msg.frame;
  out.owner = msg.owner;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (alive[i]) out.boxes.push_back(boxes[i]);
  }
  out.boxes.insert(out.boxes.end(), injected.begin(), injected.end());
  return out;
}

namespace {

// Shared hill-climbing state for the targeted and untargeted searches.
class EditSearch {
 public:
  EditSearch(const scene::DetectionSet& y_clean, const scene::DetectionSet& y_gt, const BlindMask* mask,
             const AttackBudget& budget, const SearchParams& search, const GridSpec& grid)
      : clean_(y_clean),
        mask_(mask),
        budget_(budget),
        search_(search),
        grid_(grid),
        raster_(grid, search.samples_per_axis),
        gt_(occupancy_grid(y_gt, grid, search.samples_per_axis)),
        contrib_(grid.size(), 0.0),
        edited_(y_clean.size(), false),
        current_(y_clean.boxes) {
    raster_.add(y_clean);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      contrib_[i] = loss_at(i);
      loss_ += contrib_[i];
    }
    for (int r = 0; r < grid.rows; ++r) {
      for (int c = 0; c < grid.cols; ++c) {
        if (mask_ && !mask_->blind(r, c)) continue;
        if (mask_ && distance(grid.cell_center(r, c), search.injection.attacker_position) >
                         search.injection.sensing_radius) {
          continue;
        }
        inject_cells_.push_back({r, c});
      }
    }
    injected_at_.assign(grid.size(), false);
  }

  PerturbationPlan run(Rng& rng) {
    PerturbationPlan plan;
    plan.input_budget = budget_.delta_i;
    plan.output_budget = budget_.delta_o;
    plan.blind_weight = budget_.w_delta;
    plan.initial_loss = loss_;
    plan.loss = loss_;
    if (budget_.delta_i <= 0.0) return plan;
    if (mask_ && mask_->blind_count() == 0) return plan;

    const double p_sum = search_.p_inject + search_.p_shift + search_.p_drop;
    if (p_sum <= 0.0) throw ConfigError("edit search: proposal probabilities sum to zero");
    for (int it = 0; it < search_.iters; ++it) {
      auto edit = propose(rng, p_sum);
      if (!edit) continue;
      const double cost = edit_cost(*edit, search_.costs);
      if (plan.input_magnitude + cost > budget_.delta_i + kBudgetSlack) continue;
      double touched_s = 0.0;
      const double gain = try_edit(*edit, touched_s);
      if (gain > 0.0) {
        commit(*edit);
        plan.edits.push_back(*edit);
        plan.suppression.push_back(touched_s);
        plan.input_magnitude += cost;
        plan.loss = loss_;
        plan.loss_trace.push_back(loss_);
      } else {
        revert(*edit);
      }
    }
    return plan;
  }

 private:
  bool weighted() const { return mask_ != nullptr; }

  double loss_at(std::size_t i) const {
    const bool blind = mask_ && mask_->cells[i] == kBlind;
    return cell_loss(raster_.occupancy(i), gt_[i], blind, weighted(), budget_);
  }

  Corners corners_after(const BoxEdit& e) const {
    Corners c = current_[e.box_id].corners;
    for (int k = 0; k < 8; ++k) c[k] += e.delta[k];
    return c;
  }

  // Applies the edit to the raster and returns the loss change; touched_s receives the mean
  // suppression weight over the affected cells.
  double try_edit(const BoxEdit& e, double& touched_s) {
    std::vector<std::size_t> touched;
    auto append = [&](std::vector<std::size_t> cells) { touched.insert(touched.end(), cells.begin(), cells.end()); };
    switch (e.kind) {
      case EditKind::inject:
        append(raster_.update(e.box.corners, +1));
        break;
      case EditKind::drop:
        append(raster_.update(current_[e.box_id].corners, -1));
        break;
      case EditKind::shift:
        append(raster_.update(current_[e.box_id].corners, -1));
        append(raster_.update(corners_after(e), +1));
        break;
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    double gain = 0.0;
    double s_sum = 0.0;
    pending_.clear();
    for (std::size_t i : touched) {
      const double v = loss_at(i);
      gain += v - contrib_[i];
      pending_.emplace_back(i, v);
      s_sum += 1.0 - sigmoid(std::abs(raster_.occupancy(i) - gt_[i]) - budget_.delta_o);
    }
    touched_s = touched.empty() ? 0.0 : s_sum / static_cast<double>(touched.size());
    return gain;
  }

  void commit(const BoxEdit& e) {
    for (auto [i, v] : pending_) {
      loss_ += v - contrib_[i];
      contrib_[i] = v;
    }
    if (e.kind == EditKind::inject) {
      const Cell c = cell_of(grid_, corners_center(e.box.corners));
      injected_at_[grid_.index(c.row, c.col)] = true;
    } else {
      if (e.kind == EditKind::shift) current_[e.box_id].corners = corners_after(e);
      edited_[e.box_id] = true;
    }
  }

  void revert(const BoxEdit& e) {
    switch (e.kind) {
      case EditKind::inject:
        raster_.update(e.box.corners, -1);
        break;
      case EditKind::drop:
        raster_.update(current_[e.box_id].corners, +1);
        break;
      case EditKind::shift:
        raster_.update(corners_after(e), -1);
        raster_.update(current_[e.box_id].corners, +1);
        break;
    }
  }

  std::vector<int> editable_boxes() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < clean_.size(); ++i) {
      if (!edited_[i]) out.push_back(static_cast<int>(i));
    }
    return out;
  }

  double injection_heading(Vec2 at) const {
    double best = std::numeric_limits<double>::infinity();
    double heading = 0.0;
    for (const auto& b : clean_.boxes) {
      const double d = distance(corners_center(b.corners), at);
      if (d < best) {
        best = d;
        const Vec2 front = 0.5 * (corner(b.corners, 0) + corner(b.corners, 3));
        const Vec2 dir = front - corners_center(b.corners);
        heading = std::atan2(dir.y, dir.x);
      }
    }
    return heading;
  }

  std::optional<BoxEdit> propose_inject(Rng& rng) {
    std::vector<Cell> free;
    for (Cell c : inject_cells_) {
      if (!injected_at_[grid_.index(c.row, c.col)]) free.push_back(c);
    }
    if (free.empty()) return std::nullopt;
    const Cell c = free[static_cast<std::size_t>(rng.integer(0, static_cast<long long>(free.size()) - 1))];
    const Vec2 at = grid_.cell_center(c.row, c.col);
    const auto& inj = search_.injection;
    BoxEdit e;
    e.kind = EditKind::inject;
    e.box.corners = make_corners(at, injection_heading(at), inj.extent.x, inj.extent.y);
    const double range = distance(at, inj.attacker_position);
    e.box.confidence = std::clamp(inj.sensor.confidence_at(range, inj.sensing_radius),
                                  inj.sensor.false_positive_confidence, 1.0);
    e.box.class_posterior = scene::posterior_for_confidence(e.box.confidence);
    e.box.source_agent = clean_.owner;
    return e;
  }

  std::optional<BoxEdit> propose_shift(Rng& rng) {
    const auto boxes = editable_boxes();
    if (boxes.empty()) return std::nullopt;
    const int id = boxes[static_cast<std::size_t>(rng.integer(0, static_cast<long long>(boxes.size()) - 1))];
    const double r = search_.max_shift * std::sqrt(rng.uniform());
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    BoxEdit e;
    e.kind = EditKind::shift;
    e.box_id = id;
    for (int k = 0; k < 4; ++k) {
      e.delta[2 * k] = r * std::cos(a);
      e.delta[2 * k + 1] = r * std::sin(a);
    }
    return e;
  }

  std::optional<BoxEdit> propose_drop(Rng& rng) {
    auto boxes = editable_boxes();
    if (boxes.empty()) return std::nullopt;
    std::stable_sort(boxes.begin(), boxes.end(),
                     [&](int a, int b) { return clean_.boxes[a].confidence < clean_.boxes[b].confidence; });
    const std::size_t low = (boxes.size() + 1) / 2;  // lower-confidence half
    BoxEdit e;
    e.kind = EditKind::drop;
    e.box_id = boxes[static_cast<std::size_t>(rng.integer(0, static_cast<long long>(low) - 1))];
    return e;
  }

  std::optional<BoxEdit> propose(Rng& rng, double p_sum) {
    const double u = rng.uniform(0.0, p_sum);
    if (u < search_.p_inject) return propose_inject(rng);
    if (u < search_.p_inject + search_.p_shift) return propose_shift(rng);
    return propose_drop(rng);
  }

  const scene::DetectionSet& clean_;
  const BlindMask* mask_;
  AttackBudget budget_;
  SearchParams search_;
  GridSpec grid_;
  OccupancyRaster raster_;
  std::vector<double> gt_;
  std::vector<double> contrib_;
  double loss_ = 0.0;
  std::vector<bool> edited_;
  std::vector<scene::DetectionBox> current_;
  std::vector<Cell> inject_cells_;
  std::vector<bool> injected_at_;
  std::vector<std::pair<std::size_t, double>> pending_;
};

}  // namespace

PerturbationPlan optimize_bac(const scene::DetectionSet& y_clean, const scene::DetectionSet& y_gt,
                              const BlindMask& mask, const AttackBudget& budget, const SearchParams& search,
                              Rng& rng) {
  if (search.iters < 1) throw ConfigError("optimize_bac: iters must be >= 1");
  EditSearch s(y_clean, y_gt, &mask, budget, search, mask.cells.spec());
  return s.run(rng);
}

PerturbationPlan baseline_attack(const scene::DetectionSet& y_clean, const scene::DetectionSet& y_gt,
                                 const AttackBudget& budget, const SearchParams& search, Rng& rng) {
  if (search.iters < 1) throw ConfigError("baseline_attack: iters must be >= 1");
  EditSearch s(y_clean, y_gt, nullptr, budget, search, search.injection.sensor.grid);
  return s.run(rng);
}

}  // namespace bevguard::attack
