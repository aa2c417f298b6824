#pragma once

#include <cstdint>
#include <vector>

#include "bevguard/core/rng.hpp"

namespace bevguard::attack {

enum class AttackMode { random, poisson, spreading };

struct AttackProcessParams {
  AttackMode mode = AttackMode::random;
  int n_agents = 5;        // N_a
  int horizon = 100;       // T frames
  int n_malicious = 2;     // m
  double attack_ratio = 0.25;  // lambda
  double alloc_std = 2.0;
  double propagation_rate = 0.3;  // gamma, spreading mode only
  std::uint64_t seed = 0;
  /// Agent ids of the designated attackers; defaults to 0..m-1 when empty.
  std::vector<int> attackers;
  /// Euler sub-steps per frame when integrating the spreading ODE.
  int ode_substeps = 100;
};

struct AttackSchedule {
  int horizon = 0;
  int n_agents = 0;
  std::vector<std::uint8_t> active;  // horizon x n_agents, row-major by frame
  std::vector<int> attackers;
  std::vector<int> per_agent_totals;  // aligned with attackers

  bool is_active(int frame, int agent) const;
  int total() const;
  int frame_count(int frame) const;
};

/// round(lambda * N_a * T).
int target_total(const AttackProcessParams& p);

/// Throws ConfigError for infeasible or malformed parameters.
void validate(const AttackProcessParams& p);

/// Per-attacker message quotas: truncated normal N(total/m, sigma^2) on [1, T] by rejection,
/// rescaled and rounded so they sum to the target total.
std::vector<int> allocate_quotas(const AttackProcessParams& p, Rng& rng);

/// One unclamped Poisson(lambda * N_a) per-frame message count.
int draw_frame_count(const AttackProcessParams& p, Rng& rng);

/// Cumulative logistic message count N_t at each frame (N_0 = 1), explicit Euler with
/// `ode_substeps` sub-steps per frame.
std::vector<double> logistic_trajectory(const AttackProcessParams& p);

AttackSchedule schedule_r(const AttackProcessParams& p, Rng& rng);
AttackSchedule schedule_p(const AttackProcessParams& p, Rng& rng);
AttackSchedule schedule_s(const AttackProcessParams& p, Rng& rng);
AttackSchedule make_schedule(const AttackProcessParams& p, Rng& rng);

/// Frames between blind-mask recomputations for a given simulation and mask update rate.
int mask_refresh_period(double sim_fps, double mask_fps);

}  // namespace bevguard::attack
