#pragma once

#include <optional>
#include <vector>

#include "bevguard/attack/segmentation.hpp"
#include "bevguard/core/rng.hpp"
#include "bevguard/scene/sensor.hpp"
#include "bevguard/scene/types.hpp"

namespace bevguard::attack {

enum class EditKind { inject, shift, drop };

struct BoxEdit {
  EditKind kind = EditKind::inject;
  scene::DetectionBox box;  // inject only
  int box_id = -1;          // index into the original message (shift / drop)
  Corners delta{};          // shift only
};

/// Budgets: Delta_i bounds edit input magnitude, Delta_o is the suppression threshold, w_delta
/// weights the inverted blind mask.
struct AttackBudget {
  double delta_i = 0.5;
  double delta_o = 0.5;
  double w_delta = 2.0;
};

/// Input-magnitude convention for detection-space edits.
struct EditCosts {
  double inject = 0.05;
  double drop = 0.05;
  double shift_per_unit = 0.05;  // per unit L2 norm of the 8-value corner delta
};

/// Where injected boxes come from and what confidence they claim.
struct InjectionModel {
  Vec2 attacker_position;  // grid coordinates
  double sensing_radius = 25.0;  // grid units
  scene::SensorModel sensor{};
  Vec2 extent{4.5, 2.0};  // grid units
};

struct SearchParams {
  int iters = 30;
  double p_inject = 0.5;
  double p_shift = 0.3;
  double p_drop = 0.2;
  double max_shift = 1.5;  // grid units, rigid translation radius
  int samples_per_axis = 4;
  EditCosts costs{};
  InjectionModel injection{};
};

struct PerturbationPlan {
  std::vector<BoxEdit> edits;
  double input_budget = 0.0;
  double output_budget = 0.0;
  double blind_weight = 0.0;
  std::vector<double> suppression;  // mean S_delta over the cells each edit touched
  double input_magnitude = 0.0;
  double initial_loss = 0.0;
  double loss = 0.0;
  std::vector<double> loss_trace;  // weighted loss after each accepted edit

  bool empty() const { return edits.empty(); }
};

double edit_cost(const BoxEdit& e, const EditCosts& costs);
double plan_input_magnitude(const std::vector<BoxEdit>& edits, const EditCosts& costs);

/// S_delta = 1 - sigmoid(dev - Delta_o), elementwise.
std::vector<double> suppression_weight(const std::vector<double>& dev, double delta_o);

/// W_delta-weighted occupancy loss sum_c W_c * |occ_c - gt_c| with W = w * blind + S_delta.
/// Passing no mask gives the unweighted loss used by the untargeted baseline.
double weighted_loss(const std::vector<double>& occ, const std::vector<double>& gt, const BlindMask* mask,
                     const AttackBudget& budget);

/// Blind-area-confusion perturbation search: greedy hill climbing over box edits, each accepted
/// only if it raises the weighted loss and keeps the input magnitude within Delta_i. Injected
/// boxes are only ever placed in blind cells.
PerturbationPlan optimize_bac(const scene::DetectionSet& y_clean, const scene::DetectionSet& y_gt,
                              const BlindMask& mask, const AttackBudget& budget, const SearchParams& search,
                              Rng& rng);

/// Untargeted baseline: same search, unweighted loss, edit locations uniform over the
/// attacker's reach.
PerturbationPlan baseline_attack(const scene::DetectionSet& y_clean, const scene::DetectionSet& y_gt,
                                 const AttackBudget& budget, const SearchParams& search, Rng& rng);

/// Applies edits in order. Throws InputError on a dangling box id or a shift that breaks
/// corner convexity.
scene::DetectionSet apply_plan(const scene::DetectionSet& msg, const PerturbationPlan& plan);

}  // namespace bevguard::attack
