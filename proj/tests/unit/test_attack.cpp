#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <map>

#include "bevguard/attack/occupancy.hpp"
#include "bevguard/attack/perturbation.hpp"
#include "bevguard/attack/schedule.hpp"
#include "bevguard/attack/segmentation.hpp"
#include "bevguard/core/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace bevguard;
using namespace bevguard::attack;
using bevguard::testing::box_at;

namespace {

AttackProcessParams params(AttackMode mode, int n_agents, int horizon, int m, double lambda) {
  AttackProcessParams p;
  p.mode = mode;
  p.n_agents = n_agents;
  p.horizon = horizon;
  p.n_malicious = m;
  p.attack_ratio = lambda;
  return p;
}

void check_schedule_invariants(const AttackSchedule& s, const AttackProcessParams& p) {
  int sum = 0;
  for (std::size_t a = 0; a < s.attackers.size(); ++a) {
    sum += s.per_agent_totals[a];
    int active = 0;
    for (int t = 0; t < s.horizon; ++t) active += s.is_active(t, s.attackers[a]);
    CHECK(active == s.per_agent_totals[a]);
  }
  CHECK(sum == s.total());
  for (int agent = 0; agent < p.n_agents; ++agent) {
    if (std::find(s.attackers.begin(), s.attackers.end(), agent) != s.attackers.end()) continue;
    for (int t = 0; t < s.horizon; ++t) CHECK_FALSE(s.is_active(t, agent));
  }
}

}  // namespace

TEST_CASE("R-mode schedule totals") {
  Rng rng(1);
  auto p = params(AttackMode::random, 4, 40, 2, 0.25);
  const auto s = schedule_r(p, rng);
  CHECK(s.total() == 40);
  check_schedule_invariants(s, p);
  for (int q : s.per_agent_totals) {
    CHECK(q >= 1);
    CHECK(q <= 40);
  }

  // lambda * N_a * T == m with no spread: one frame each.
  auto minimal = params(AttackMode::random, 4, 40, 2, 2.0 / 160.0);
  minimal.alloc_std = 0.0;
  const auto ms = schedule_r(minimal, rng);
  CHECK(ms.per_agent_totals == std::vector<int>{1, 1});
}

TEST_CASE("R-mode infeasible totals are configuration errors") {
  Rng rng(1);
  CHECK_THROWS_AS(schedule_r(params(AttackMode::random, 4, 10, 1, 0.5), rng), ConfigError);
  CHECK_THROWS_AS(schedule_r(params(AttackMode::random, 2, 10, 3, 0.5), rng), ConfigError);
}

TEST_CASE("truncated-normal quotas average to the fair share") {
  Rng rng(2024);
  auto p = params(AttackMode::random, 5, 100, 2, 0.25);
  p.alloc_std = 2.0;
  double mean0 = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto q = allocate_quotas(p, rng);
    CHECK(q[0] + q[1] == 125);
    mean0 += q[0];
  }
  CHECK(std::fabs(mean0 / draws - 62.5) < 0.1);
}

TEST_CASE("P-mode per-frame counts follow the Poisson law") {
  Rng rng(3);
  auto p = params(AttackMode::poisson, 4, 100, 4, 0.25);
  int zeros = 0;
  const int frames = 10000;
  for (int i = 0; i < frames; ++i) zeros += draw_frame_count(p, rng) == 0;
  CHECK(std::fabs(static_cast<double>(zeros) / frames - std::exp(-1.0)) < 0.01);
}

TEST_CASE("P-mode edge cases and invariants") {
  Rng rng(4);
  auto none = params(AttackMode::poisson, 4, 50, 2, 0.0);
  CHECK(schedule_p(none, rng).total() == 0);

  auto sat = params(AttackMode::poisson, 4, 30, 4, 1.0);
  const auto s = schedule_p(sat, rng);
  CHECK(s.total() == 120);
  for (int t = 0; t < 30; ++t) CHECK(s.frame_count(t) == 4);

  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng r(seed);
    auto p = params(AttackMode::poisson, 5, 100, 2, 0.25);
    const auto sp = schedule_p(p, r);
    CHECK(sp.total() == target_total(p));
    check_schedule_invariants(sp, p);
  }
}

TEST_CASE("S-mode logistic growth") {
  Rng rng(5);
  auto zero = params(AttackMode::spreading, 5, 100, 2, 0.25);
  zero.propagation_rate = 0.0;
  CHECK(schedule_s(zero, rng).total() == 1);

  auto sat = params(AttackMode::spreading, 4, 100, 2, 0.1);  // capacity 40
  sat.propagation_rate = 2.0;
  const auto s = schedule_s(sat, rng);
  CHECK(s.total() == 40);
  check_schedule_invariants(s, sat);

  // Against the closed-form logistic curve.
  auto p = params(AttackMode::spreading, 5, 60, 2, 0.25);
  p.propagation_rate = 0.3;
  const auto traj = logistic_trajectory(p);
  const double k = 0.25 * 5 * 60;
  for (int t = 0; t < 60; ++t) {
    const double exact = k / (1.0 + (k - 1.0) * std::exp(-0.3 * t));
    CHECK(std::fabs(traj[static_cast<std::size_t>(t)] - exact) < 1.0);
  }

  // Cumulative count is non-decreasing and never exceeds the target.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng r(seed);
    const auto sp = schedule_s(p, r);
    int cum = 0;
    for (int t = 0; t < 60; ++t) {
      cum += sp.frame_count(t);
      CHECK(cum <= target_total(p));
    }
    check_schedule_invariants(sp, p);
  }
}

TEST_CASE("mask refresh period") {
  CHECK(mask_refresh_period(10.0, 0.5) == 20);
  CHECK_THROWS_AS(mask_refresh_period(10.0, 0.0), ConfigError);
}

TEST_CASE("differential detection") {
  using scene::DetectionSet;
  const DetectionSet same = testing::set_of({box_at({5, 5}), box_at({20, 20})});
  CHECK(differential_detect(same, same, 0.5).non_victim.empty());
  const DetectionSet empty;
  CHECK(differential_detect(empty, same, 0.5).non_victim.size() == 2);

  // Three overlapping pairs plus two boxes the victim does not see.
  const DetectionSet single = testing::set_of({box_at({5, 5}), box_at({15, 5}), box_at({25, 5})});
  const DetectionSet collab =
      testing::set_of({box_at({5.2, 5}), box_at({15, 5.2}), box_at({25.1, 5}), box_at({5, 30}), box_at({30, 30})});
  const auto d = differential_detect(single, collab, 0.5);
  REQUIRE(d.non_victim.size() == 2);
  CHECK(d.non_victim.boxes[0].corners == collab.boxes[3].corners);
  CHECK(d.non_victim.boxes[1].corners == collab.boxes[4].corners);
}

TEST_CASE("differential detection matches an exhaustive matching oracle") {
  // With at most one candidate above threshold per box, greedy and exhaustive matching agree on
  // the number of unmatched collaborative boxes.
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    scene::DetectionSet single, collab;
    const int n = static_cast<int>(rng.integer(0, 5));
    for (int i = 0; i < n; ++i) {
      const Vec2 c{6.0 + 10.0 * i, 6.0};
      single.boxes.push_back(box_at(c));
      if (rng.bernoulli(0.6)) collab.boxes.push_back(box_at({c.x + rng.uniform(-0.3, 0.3), c.y}));
    }
    const int extra = static_cast<int>(rng.integer(0, 3));
    for (int i = 0; i < extra; ++i) collab.boxes.push_back(box_at({6.0 + 10.0 * i, 40.0}));
    // Exhaustive: maximum matching size over all injective partial maps collab -> single.
    int best = 0;
    const int nc = static_cast<int>(collab.size());
    std::function<void(int, int, std::vector<bool>&)> search = [&](int j, int count, std::vector<bool>& used) {
      if (j == nc) {
        best = std::max(best, count);
        return;
      }
      search(j + 1, count, used);
      for (int i = 0; i < n; ++i) {
        if (used[i] || quad_iou(single.boxes[i].corners, collab.boxes[j].corners) < 0.5) continue;
        used[i] = true;
        search(j + 1, count + 1, used);
        used[i] = false;
      }
    };
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    search(0, 0, used);
    CHECK(differential_detect(single, collab, 0.5).non_victim.size() == collab.size() - best);
  }
}

TEST_CASE("adaptive neighbor counts") {
  SegmentationParams p;
  p.grid = {32, 32, 1.0};
  CHECK(adaptive_neighbors({5, 5}, {5, 5}, p).k_s == 6);
  CHECK(adaptive_neighbors({5, 5}, {5, 5}, p).cells.size() == 6);
  p.gamma_d = 0.0;
  CHECK(adaptive_neighbors({0, 0}, {31, 31}, p).k_s == 6);
  // Corner cells have only three in-grid neighbors.
  CHECK(adaptive_neighbors({0, 0}, {31, 31}, p).cells.size() == 3);
}

TEST_CASE("K_s at one grid diagonal away") {
  // No in-grid distance equals the diagonal, so gamma is rescaled to make distance 10 act as it.
  SegmentationParams p;
  p.grid = {1, 11, 1.0};
  const double diag = std::hypot(1.0, 11.0);
  p.gamma_d = 0.3 * diag / 10.0;  // distance 10 then plays the role of D_norm
  CHECK(adaptive_neighbors({0, 10}, {0, 0}, p).k_s == 5);
}

TEST_CASE("blind region segmentation: single seeds against the reference flood fill") {
  SegmentationParams p;
  p.grid = {8, 8, 1.0};
  p.gamma_d = 0.0;
  const auto vic = testing::set_of({box_at({1.5, 1.5}, 0.0, 1.0, 0.4, 0.4)});
  const auto nvic = testing::set_of({box_at({6.5, 6.5}, 0.0, 1.0, 0.4, 0.4)});
  const auto mask = segment_blind_regions(vic, nvic, p);
  REQUIRE(mask);
  CHECK(mask->victim_grid == Cell{1, 1});
  const auto ref = oracle::reference_segmentation(8, 8, {1, 1}, {{1, 1}}, {{6, 6}}, 6, 0.0);
  CHECK(mask->cells.data() == ref);
  CHECK(mask->cells.at(1, 1) == kConfident);
  CHECK(mask->cells.at(6, 6) == kBlind);
}

TEST_CASE("blind region segmentation edge cases") {
  SegmentationParams p;
  p.grid = {16, 16, 1.0};
  CHECK_FALSE(segment_blind_regions({}, testing::set_of({box_at({5, 5})}), p));

  const auto vic = testing::set_of({box_at({3.5, 3.5}, 0.0, 1.0, 0.4, 0.4)});
  const auto mask = segment_blind_regions(vic, {}, p);
  REQUIRE(mask);
  CHECK(mask->victim_grid == Cell{3, 3});
  CHECK(mask->blind(15, 15));  // farthest cell seeds the blind area

  SegmentationParams small;
  small.grid = {4, 4, 1.0};
  const auto cover = testing::set_of({box_at({2, 2}, 0.0, 1.0, 4.0, 4.0)});
  const auto full = segment_blind_regions(cover, testing::set_of({box_at({1, 1})}), small);
  REQUIRE(full);
  CHECK(full->blind_count() == 0);
}

TEST_CASE("blind region segmentation matches the reference flood fill on random layouts") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto layout = oracle::random_layout(rng);
    const auto mask = segment_blind_regions(layout.victim, layout.non_victim, layout.params);
    REQUIRE(mask);
    const auto anchor = oracle::anchor_of(layout.victim, layout.params.grid);
    CHECK(mask->victim_grid == Cell{anchor.first, anchor.second});
    CHECK(mask->cells.data() == oracle::reference_mask(layout));
    for (auto v : mask->cells.data()) CHECK((v == kConfident || v == kBlind));
  }
}

TEST_CASE("segmented regions are 4-connected to their seeds") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    SegmentationParams p;
    p.grid = {24, 24, 1.0};
    p.k_base = static_cast<int>(rng.integer(1, 8));
    const auto vic = testing::random_set(rng, 3, 24.0);
    const auto nvic = testing::random_set(rng, 2, 24.0);
    const auto mask = segment_blind_regions(vic, nvic, p);
    REQUIRE(mask);
    const GridSpec& g = p.grid;
    for (std::int8_t label : {kConfident, kBlind}) {
      const auto& seeds = label == kConfident ? vic : nvic;
      std::vector<char> seen(g.size(), 0);
      std::vector<Cell> stack;
      for (const auto& b : seeds.boxes) {
        for (Cell c : covered_cells(b, g)) {
          if (mask->cells.at(c.row, c.col) == label && !seen[g.index(c.row, c.col)]) {
            seen[g.index(c.row, c.col)] = 1;
            stack.push_back(c);
          }
        }
      }
      while (!stack.empty()) {
        const Cell c = stack.back();
        stack.pop_back();
        for (auto [dr, dc] : {std::pair{0, 1}, {1, 0}, {0, -1}, {-1, 0}}) {
          const Cell n{c.row + dr, c.col + dc};
          if (!g.contains(n.row, n.col) || seen[g.index(n.row, n.col)] || mask->cells.at(n.row, n.col) != label) continue;
          seen[g.index(n.row, n.col)] = 1;
          stack.push_back(n);
        }
      }
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (mask->cells[i] == label) CHECK(seen[i]);
      }
    }
  }
}

TEST_CASE("suppression weight") {
  const auto s = suppression_weight({0.5, 0.0, 1e6}, 0.5);
  CHECK(s[0] == doctest::Approx(0.5));
  CHECK(s[1] == doctest::Approx(1.0 - 1.0 / (1.0 + std::exp(0.5))).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(0.6225).epsilon(1e-4));
  CHECK(s[2] < 1e-12);
  CHECK_THROWS_AS(suppression_weight({-0.1}, 0.5), InputError);
}

namespace {

SearchParams toy_search(const GridSpec& g) {
  SearchParams s;
  s.iters = 200;
  s.p_inject = 1.0;
  s.p_shift = 0.0;
  s.p_drop = 0.0;
  s.samples_per_axis = 4;
  s.injection.attacker_position = {2, 2};
  s.injection.sensing_radius = 10.0;
  s.injection.sensor.grid = g;
  s.injection.extent = {1.0, 1.0};
  return s;
}

BlindMask mask_with_blind(const GridSpec& g, std::vector<Cell> blind) {
  BlindMask m{Grid<std::int8_t>(g, kConfident), {0, 0}};
  for (Cell c : blind) m.cells.at(c.row, c.col) = kBlind;
  return m;
}

}  // namespace

TEST_CASE("BAC search: empty plans") {
  const GridSpec g{4, 4, 1.0};
  const auto search = toy_search(g);
  AttackBudget budget;
  Rng rng(1);
  const auto all_one = mask_with_blind(g, {});
  const auto plan = optimize_bac({}, {}, all_one, budget, search, rng);
  CHECK(plan.empty());
  CHECK(plan.loss == plan.initial_loss);

  budget.delta_i = 0.0;
  CHECK(optimize_bac({}, {}, mask_with_blind(g, {{1, 1}}), budget, search, rng).empty());
  CHECK(baseline_attack({}, {}, budget, search, rng).empty());
}

TEST_CASE("BAC search equals exhaustive enumeration on a 4x4 toy grid") {
  const GridSpec g{4, 4, 1.0};
  const auto search = toy_search(g);
  const std::vector<Cell> cands{{0, 3}, {3, 0}};
  const auto mask = mask_with_blind(g, cands);
  for (double delta_i : {0.05, 0.1, 0.2, 0.3}) {
    AttackBudget budget;
    budget.delta_i = delta_i;
    Rng rng(9);
    const auto plan = optimize_bac({}, {}, mask, budget, search, rng);

    // Brute force over every subset of injections at the two candidate cells.
    double best = weighted_loss(occupancy_grid({}, g, 4), occupancy_grid({}, g, 4), &mask, budget);
    std::size_t best_size = 0;
    for (int subset = 0; subset < 4; ++subset) {
      PerturbationPlan p;
      for (int k = 0; k < 2; ++k) {
        if (!(subset >> k & 1)) continue;
        BoxEdit e;
        e.box = box_at(g.cell_center(cands[k].row, cands[k].col), 0.0, 1.0, 1.0, 1.0);
        p.edits.push_back(e);
      }
      if (plan_input_magnitude(p.edits, search.costs) > delta_i + 1e-12) continue;
      const auto out = apply_plan({}, p);
      const double l = weighted_loss(occupancy_grid(out, g, 4), occupancy_grid({}, g, 4), &mask, budget);
      if (l > best + 1e-12) best = l, best_size = p.edits.size();
    }
    CHECK(plan.loss == doctest::Approx(best).epsilon(1e-12));
    CHECK(plan.edits.size() == best_size);
    CHECK(plan.input_magnitude <= delta_i + 1e-12);
  }
}

TEST_CASE("BAC search invariants on random scenes") {
  Rng rng(31);
  const GridSpec g{32, 32, 1.0};
  for (int trial = 0; trial < 40; ++trial) {
    const auto clean = testing::random_set(rng, 6, 32.0);
    const auto gt = testing::random_set(rng, 6, 32.0);
    SegmentationParams sp;
    sp.grid = g;
    const auto mask = segment_blind_regions(testing::random_set(rng, 3, 32.0), testing::random_set(rng, 3, 32.0), sp);
    REQUIRE(mask);
    SearchParams search;
    search.iters = 30;
    search.injection.sensor.grid = g;
    search.injection.attacker_position = {16, 16};
    search.injection.sensing_radius = 20;
    AttackBudget budget;
    budget.delta_i = rng.uniform(0.0, 1.0);
    const auto plan = optimize_bac(clean, gt, *mask, budget, search, rng);
    CHECK(plan.input_magnitude <= budget.delta_i + 1e-12);
    CHECK(plan_input_magnitude(plan.edits, search.costs) == doctest::Approx(plan.input_magnitude));
    double prev = plan.initial_loss;
    for (double l : plan.loss_trace) {
      CHECK(l >= prev);
      prev = l;
    }
    const auto attacked = apply_plan(clean, plan);
    const double recomputed = weighted_loss(occupancy_grid(attacked, g, 4), occupancy_grid(gt, g, 4), &*mask, budget);
    CHECK(plan.loss == doctest::Approx(recomputed).epsilon(1e-9));
    for (const auto& e : plan.edits) {
      if (e.kind != EditKind::inject) continue;
      const Cell c = cell_of(g, corners_center(e.box.corners));
      CHECK(mask->blind(c.row, c.col));
    }
  }
}

TEST_CASE("baseline attack is deterministic and places injections uniformly") {
  const GridSpec g{8, 8, 1.0};
  SearchParams search = toy_search(g);
  search.iters = 1;
  AttackBudget budget;
  {
    Rng a(5), b(5);
    const auto pa = baseline_attack({}, {}, budget, search, a);
    const auto pb = baseline_attack({}, {}, budget, search, b);
    REQUIRE(pa.edits.size() == pb.edits.size());
    for (std::size_t i = 0; i < pa.edits.size(); ++i) CHECK(pa.edits[i].box.corners == pb.edits[i].box.corners);
  }
  std::vector<double> counts(g.size(), 0.0);
  Rng rng(17);
  const int runs = 10000;
  for (int i = 0; i < runs; ++i) {
    const auto plan = baseline_attack({}, {}, budget, search, rng);
    REQUIRE(plan.edits.size() == 1);
    const Cell c = cell_of(g, corners_center(plan.edits[0].box.corners));
    counts[g.index(c.row, c.col)] += 1.0;
  }
  const double expected = static_cast<double>(runs) / static_cast<double>(g.size());
  double chi2 = 0.0;
  for (double n : counts) chi2 += (n - expected) * (n - expected) / expected;
  const boost::math::chi_squared dist(static_cast<double>(g.size() - 1));
  CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 0.01);
}

TEST_CASE("apply_plan semantics") {
  const auto msg = testing::set_of({box_at({5, 5}), box_at({15, 5}), box_at({25, 5})});
  const auto same = apply_plan(msg, {});
  REQUIRE(same.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(same.boxes[i].corners == msg.boxes[i].corners);

  PerturbationPlan inject;
  inject.edits.push_back({EditKind::inject, box_at({10, 20}), -1, {}});
  const auto injected = apply_plan(msg, inject);
  CHECK(injected.size() == 4);
  CHECK(injected.boxes.back().forged);

  PerturbationPlan dangling;
  dangling.edits.push_back({EditKind::drop, {}, 7, {}});
  CHECK_THROWS_AS(apply_plan(msg, dangling), InputError);

  PerturbationPlan twice;
  twice.edits.push_back({EditKind::drop, {}, 1, {}});
  twice.edits.push_back({EditKind::drop, {}, 1, {}});
  CHECK_THROWS_AS(apply_plan(msg, twice), InputError);

  PerturbationPlan collapse;
  BoxEdit squash{EditKind::shift, {}, 0, {}};
  squash.delta[0] = -10.0;  // front-left corner folds past the rear corners
  collapse.edits.push_back(squash);
  CHECK_THROWS_AS(apply_plan(msg, collapse), InputError);
}

TEST_CASE("shifts are exactly invertible") {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto msg = testing::random_set(rng, 5, 30.0);
    PerturbationPlan fwd, back;
    for (int k = 0; k < 3; ++k) {
      const int id = static_cast<int>(rng.integer(0, 4));
      BoxEdit e{EditKind::shift, {}, id, {}};
      const double dx = rng.uniform(-2, 2), dy = rng.uniform(-2, 2);
      for (int j = 0; j < 4; ++j) e.delta[2 * j] = dx, e.delta[2 * j + 1] = dy;
      fwd.edits.push_back(e);
      for (double& v : e.delta) v = -v;
      back.edits.insert(back.edits.begin(), e);
    }
    const auto restored = apply_plan(apply_plan(msg, fwd), back);
    for (std::size_t i = 0; i < msg.size(); ++i) {
      for (int k = 0; k < 8; ++k) CHECK(std::fabs(restored.boxes[i].corners[k] - msg.boxes[i].corners[k]) < 1e-9);
    }
  }
}

TEST_CASE("incremental occupancy raster equals a fresh rasterization") {
  Rng rng(14);
  const GridSpec g{24, 24, 1.0};
  OccupancyRaster raster(g, 4);
  std::vector<scene::DetectionBox> live;
  for (int step = 0; step < 200; ++step) {
    if (live.empty() || rng.bernoulli(0.6)) {
      live.push_back(testing::random_box(rng, 24.0));
      raster.update(live.back().corners, +1);
    } else {
      const auto i = static_cast<std::size_t>(rng.integer(0, static_cast<long long>(live.size()) - 1));
      raster.update(live[i].corners, -1);
      live.erase(live.begin() + static_cast<long>(i));
    }
  }
  scene::DetectionSet set;
  set.boxes = live;
  const auto fresh = occupancy_grid(set, g, 4);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(raster.occupancy(i) == fresh[i]);
}
