#include "bevguard/attack/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bevguard/core/error.hpp"

namespace bevguard::attack {

bool AttackSchedule::is_active(int frame, int agent) const {
  if (frame < 0 || frame >= horizon || agent < 0 || agent >= n_agents) return false;
  return active[static_cast<std::size_t>(frame) * n_agents + agent] != 0;
}

int AttackSchedule::total() const { return static_cast<int>(std::count(active.begin(), active.end(), 1)); }

int AttackSchedule::frame_count(int frame) const {
  int n = 0;
  for (int a = 0; a < n_agents; ++a) n += is_active(frame, a) ? 1 : 0;
  return n;
}

int target_total(const AttackProcessParams& p) {
  return static_cast<int>(std::llround(p.attack_ratio * p.n_agents * p.horizon));
}

void validate(const AttackProcessParams& p) {
  if (p.n_agents < 1 || p.horizon < 1) throw ConfigError("attack: n_agents and horizon must be >= 1");
  if (p.n_malicious < 0 || p.n_malicious > p.n_agents) {
    throw ConfigError("attack: n_malicious must lie in [0, n_agents]");
  }
  if (!(p.attack_ratio >= 0.0 && p.attack_ratio <= 1.0)) throw ConfigError("attack: ratio must lie in [0, 1]");
  if (p.alloc_std < 0.0) throw ConfigError("attack: alloc_std must be >= 0");
  if (p.propagation_rate < 0.0) throw ConfigError("attack: propagation_rate must be >= 0");
  if (p.ode_substeps < 1) throw ConfigError("attack: ode_substeps must be >= 1");
  if (!p.attackers.empty() && static_cast<int>(p.attackers.size()) != p.n_malicious) {
    throw ConfigError("attack: attackers list must have n_malicious entries");
  }
  for (int a : p.attackers) {
    if (a < 0 || a >= p.n_agents) throw ConfigError("attack: attacker id out of range");
  }
  const int total = target_total(p);
  if (total > p.n_malicious * p.horizon) {
    throw ConfigError("attack: " + std::to_string(total) + " malicious messages exceed m*T = " +
                      std::to_string(p.n_malicious * p.horizon));
  }
  if (total > 0 && total < p.n_malicious) {
    throw ConfigError("attack: fewer malicious messages than attackers (lambda*N_a*T < m)");
  }
}

namespace {

std::vector<int> attacker_ids(const AttackProcessParams& p) {
  if (!p.attackers.empty()) return p.attackers;
  std::vector<int> ids(static_cast<std::size_t>(p.n_malicious));
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

AttackSchedule empty_schedule(const AttackProcessParams& p) {
  AttackSchedule s;
  s.horizon = p.horizon;
  s.n_agents = p.n_agents;
  s.active.assign(static_cast<std::size_t>(p.horizon) * p.n_agents, 0);
  s.attackers = attacker_ids(p);
  s.per_agent_totals.assign(s.attackers.size(), 0);
  return s;
}

void mark(AttackSchedule& s, int frame, std::size_t attacker_slot) {
  s.active[static_cast<std::size_t>(frame) * s.n_agents + s.attackers[attacker_slot]] = 1;
  ++s.per_agent_totals[attacker_slot];
}

// Rounds positive reals to integers in [1, T] summing to `total` (largest remainder).
std::vector<int> round_to_total(const std::vector<double>& raw, int total, int horizon) {
  const double sum = std::accumulate(raw.begin(), raw.end(), 0.0);
  const std::size_t m = raw.size();
  std::vector<double> scaled(m);
  for (std::size_t i = 0; i < m; ++i) scaled[i] = sum > 0 ? raw[i] * total / sum : double(total) / m;
  std::vector<int> q(m);
  for (std::size_t i = 0; i < m; ++i) q[i] = std::clamp(static_cast<int>(std::floor(scaled[i])), 1, horizon);
  auto deficit = [&] { return total - std::accumulate(q.begin(), q.end(), 0); };
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return (scaled[a] - q[a]) > (scaled[b] - q[b]);
  });
  // Hand out the remainder by fractional part, then settle any clamping residue.
  for (std::size_t k = 0; deficit() > 0 && k < m; ++k) {
    if (q[order[k]] < horizon) ++q[order[k]];
  }
  while (deficit() > 0) {
    auto it = std::min_element(q.begin(), q.end());
    if (*it >= horizon) break;
    ++*it;
  }
  while (deficit() < 0) {
    auto it = std::max_element(q.begin(), q.end());
    if (*it <= 1) break;
    --*it;
  }
  return q;
}

}  // namespace

std::vector<int> allocate_quotas(const AttackProcessParams& p, Rng& rng) {
  const int total = target_total(p);
  const std::size_t m = static_cast<std::size_t>(p.n_malicious);
  if (m == 0 || total == 0) return std::vector<int>(m, 0);
  const double mean = static_cast<double>(total) / static_cast<double>(m);
  std::vector<double> raw(m);
  for (auto& r : raw) {
    double x = std::clamp(mean, 1.0, static_cast<double>(p.horizon));
    for (int attempt = 0; attempt < 100000; ++attempt) {
      const double draw = rng.normal(mean, p.alloc_std);
      if (draw >= 1.0 && draw <= p.horizon) {
        x = draw;
        break;
      }
    }
    r = x;
  }
  return round_to_total(raw, total, p.horizon);
}

int draw_frame_count(const AttackProcessParams& p, Rng& rng) {
  return rng.poisson(p.attack_ratio * p.n_agents);
}

std::vector<double> logistic_trajectory(const AttackProcessParams& p) {
  const double capacity = p.attack_ratio * p.n_agents * p.horizon;
  std::vector<double> n(static_cast<std::size_t>(p.horizon), 0.0);
  if (capacity <= 0.0) return n;
  const double dt = 1.0 / p.ode_substeps;
  double x = 1.0;
  for (int t = 0; t < p.horizon; ++t) {
    if (t > 0) {
      for (int k = 0; k < p.ode_substeps; ++k) x += dt * p.propagation_rate * x * (1.0 - x / capacity);
    }
    n[static_cast<std::size_t>(t)] = x;
  }
  return n;
}

AttackSchedule schedule_r(const AttackProcessParams& p, Rng& rng) {
  validate(p);
  AttackSchedule s = empty_schedule(p);
  if (target_total(p) == 0 || p.n_malicious == 0) return s;
  const auto quotas = allocate_quotas(p, rng);
  std::vector<int> frames(static_cast<std::size_t>(p.horizon));
  for (std::size_t a = 0; a < quotas.size(); ++a) {
    std::iota(frames.begin(), frames.end(), 0);
    // Partial Fisher-Yates: the first quota entries are a uniform sample without replacement.
    for (int i = 0; i < quotas[a]; ++i) {
      const auto j = static_cast<std::size_t>(rng.integer(i, p.horizon - 1));
      std::swap(frames[static_cast<std::size_t>(i)], frames[j]);
      mark(s, frames[static_cast<std::size_t>(i)], a);
    }
  }
  return s;
}

AttackSchedule schedule_p(const AttackProcessParams& p, Rng& rng) {
  validate(p);
  AttackSchedule s = empty_schedule(p);
  const int total = target_total(p);
  const int m = p.n_malicious;
  if (total == 0 || m == 0) return s;
  const auto quotas = allocate_quotas(p, rng);

  std::vector<int> counts(static_cast<std::size_t>(p.horizon));
  for (auto& c : counts) c = std::clamp(draw_frame_count(p, rng), 0, m);
  int sum = std::accumulate(counts.begin(), counts.end(), 0);
  // Rejection-resample single frames until the global total is met.
  for (long long iter = 0; sum != total && iter < 10'000'000; ++iter) {
    const auto t = static_cast<std::size_t>(rng.integer(0, p.horizon - 1));
    const int redraw = std::clamp(draw_frame_count(p, rng), 0, m);
    const int candidate = sum - counts[t] + redraw;
    if (std::abs(candidate - total) < std::abs(sum - total)) {
      counts[t] = redraw;
      sum = candidate;
    }
  }
  // Pathological rates (e.g. lambda*N_a ~ 0 with a positive target): settle deterministically.
  for (std::size_t t = 0; sum < total && t < counts.size(); ++t) {
    const int add = std::min(m - counts[t], total - sum);
    counts[t] += add;
    sum += add;
  }
  for (std::size_t t = 0; sum > total && t < counts.size(); ++t) {
    const int sub = std::min(counts[t], sum - total);
    counts[t] -= sub;
    sum -= sub;
  }

  // Serve attackers with the most remaining quota first; ties rotate round-robin.
  std::vector<int> remaining = quotas;
  std::size_t rr = 0;
  for (int t = 0; t < p.horizon; ++t) {
    std::vector<std::size_t> order(static_cast<std::size_t>(m));
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = (rr + k) % order.size();
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remaining[a] > remaining[b]; });
    for (int k = 0; k < counts[static_cast<std::size_t>(t)]; ++k) {
      mark(s, t, order[static_cast<std::size_t>(k)]);
      --remaining[order[static_cast<std::size_t>(k)]];
    }
    rr = (rr + 1) % static_cast<std::size_t>(m);
  }
  return s;
}

AttackSchedule schedule_s(const AttackProcessParams& p, Rng& rng) {
  validate(p);
  AttackSchedule s = empty_schedule(p);
  const int total = target_total(p);
  const int m = p.n_malicious;
  if (total == 0 || m == 0) return s;
  const auto quotas = allocate_quotas(p, rng);
  const auto trajectory = logistic_trajectory(p);

  std::vector<int> remaining = quotas;
  std::size_t next = 0;  // infection order cursor
  int pending = 0;
  int previous = 0;
  for (int t = 0; t < p.horizon; ++t) {
    const int cumulative = std::min(total, static_cast<int>(std::llround(trajectory[static_cast<std::size_t>(t)])));
    pending += std::max(0, cumulative - previous);
    previous = std::max(previous, cumulative);
    const int emit = std::min(pending, m);
    std::vector<bool> used(static_cast<std::size_t>(m), false);
    for (int k = 0; k < emit; ++k) {
      // Next attacker in infection order with quota left; any unused one once quotas run out.
      std::size_t pick = static_cast<std::size_t>(m);
      for (int step = 0; step < m; ++step) {
        const std::size_t a = (next + static_cast<std::size_t>(step)) % static_cast<std::size_t>(m);
        if (!used[a] && remaining[a] > 0) {
          pick = a;
          break;
        }
      }
      if (pick == static_cast<std::size_t>(m)) {
        for (int step = 0; step < m; ++step) {
          const std::size_t a = (next + static_cast<std::size_t>(step)) % static_cast<std::size_t>(m);
          if (!used[a]) {
            pick = a;
            break;
          }
        }
      }
      used[pick] = true;
      --remaining[pick];
      mark(s, t, pick);
      next = (pick + 1) % static_cast<std::size_t>(m);
    }
    pending -= emit;
  }
  return s;
}

AttackSchedule make_schedule(const AttackProcessParams& p, Rng& rng) {
  switch (p.mode) {
    case AttackMode::random: return schedule_r(p, rng);
    case AttackMode::poisson: return schedule_p(p, rng);
    case AttackMode::spreading: return schedule_s(p, rng);
  }
  throw ConfigError("attack: unknown mode");
}

int mask_refresh_period(double sim_fps, double mask_fps) {
  if (sim_fps <= 0.0 || mask_fps <= 0.0) throw ConfigError("mask update rate and simulation rate must be > 0");
  return std::max(1, static_cast<int>(std::llround(sim_fps / mask_fps)));
}

}  // namespace bevguard::attack
