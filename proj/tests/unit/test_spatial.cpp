#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bevguard/core/error.hpp"
#include "bevguard/spatial/consistency.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace bevguard;
using namespace bevguard::spatial;
using bevguard::testing::box_at;
using bevguard::testing::random_set;

namespace {

scene::DetectionBox square(Vec2 center, double posterior) {
  auto b = box_at(center, 0.0, 1.0, 1.0, 1.0);
  b.class_posterior = posterior;
  return b;
}

scene::ConfidenceMap uniform_map(int n, double value) {
  return {Grid<double>({n, n, 1.0}, value)};
}

}  // namespace

TEST_CASE("iou on hand cases") {
  const auto a = square({5, 5}, 1.0);
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, square({8, 8}, 1.0)) == 0.0);
  CHECK(iou(a, square({5.5, 5}, 1.0)) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("match cost examples") {
  const MatchCostParams params;
  CHECK(match_cost(square({5, 5}, 0.7), square({5, 5}, 0.7), params) == doctest::Approx(0.0));
  // Shift by a third of the side: intersection 2/3, union 4/3.
  CHECK(iou(square({5, 5}, 0.9), square({5 + 1.0 / 3.0, 5}, 0.4)) == doctest::Approx(0.5));
  CHECK(match_cost(square({5, 5}, 0.9), square({5 + 1.0 / 3.0, 5}, 0.4), params) == doctest::Approx(1.0));
  CHECK(match_cost(square({5, 5}, 0.4), square({5, 5}, 0.9), params) == doctest::Approx(0.0));
  MatchCostParams heavy;
  heavy.phi = 2.0;
  CHECK(pad_cost(square({5, 5}, 0.6), heavy) == doctest::Approx(2.6));
}

TEST_CASE("assignment equals brute force on random matrices up to 6x6") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 6;
    std::vector<double> cost(static_cast<std::size_t>(n * n));
    for (auto& c : cost) c = trial % 3 == 0 ? std::floor(rng.uniform(0.0, 4.0)) : rng.uniform(0.0, 3.0);
    const auto assign = solve_assignment(cost, n);
    REQUIRE(assign.size() == static_cast<std::size_t>(n));
    std::vector<int> cols = assign;
    std::sort(cols.begin(), cols.end());
    for (int i = 0; i < n; ++i) CHECK(cols[static_cast<std::size_t>(i)] == i);
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost[static_cast<std::size_t>(i * n + assign[static_cast<std::size_t>(i)])];
    CHECK(total == doctest::Approx(oracle::brute_force_assignment(cost, n)).epsilon(1e-12));
  }
}

TEST_CASE("optimal match pads the smaller side and is cost optimal") {
  Rng rng(5);
  const MatchCostParams params;
  for (int trial = 0; trial < 100; ++trial) {
    const auto ye = random_set(rng, static_cast<int>(rng.integer(0, 6)), 20.0, 0);
    const auto yi = random_set(rng, static_cast<int>(rng.integer(0, 6)), 20.0, 1);
    const auto m = optimal_match(ye, yi, params);
    const std::size_t n = std::max(ye.size(), yi.size());
    REQUIRE(m.pairs.size() == n);
    std::vector<double> cost(n * n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        if (r < ye.size() && c < yi.size()) cost[r * n + c] = match_cost(ye.boxes[r], yi.boxes[c], params);
        else if (r < ye.size()) cost[r * n + c] = pad_cost(ye.boxes[r], params);
        else if (c < yi.size()) cost[r * n + c] = pad_cost(yi.boxes[c], params);
      }
    }
    CHECK(m.total_cost == doctest::Approx(oracle::brute_force_assignment(cost, static_cast<int>(n))).epsilon(1e-9));
    std::vector<int> seen_e, seen_c;
    for (const auto& p : m.pairs) {
      CHECK((p.ego != kPad || p.collab != kPad));
      if (p.ego != kPad) seen_e.push_back(p.ego);
      if (p.collab != kPad) seen_c.push_back(p.collab);
    }
    CHECK(seen_e.size() == ye.size());
    CHECK(seen_c.size() == yi.size());
  }
}

TEST_CASE("csc loss direct formula example") {
  // One pair of cost 1.0 in a cell of confidence 0.8, map total 40.
  Grid<double> cells({10, 10, 1.0}, 0.0);
  cells.at(2, 2) = 0.8;
  double rest = 39.2;
  for (int r = 5; r < 10 && rest > 0; ++r) {
    for (int c = 0; c < 10 && rest > 0; ++c) {
      const double v = std::min(1.0, rest);
      cells.at(r, c) = v;
      rest -= v;
    }
  }
  const scene::ConfidenceMap map{cells};
  REQUIRE(map.sum() == doctest::Approx(40.0));
  const auto ye = testing::set_of({square({2.5, 2.5}, 0.9)});
  const auto yi = testing::set_of({square({2.5 + 1.0 / 3.0, 2.5}, 0.4)});
  const auto s = csc_loss(ye, yi, map, {});
  CHECK(s.l_csc == doctest::Approx(0.02));
  REQUIRE(s.per_pair_terms.size() == 1);
  CHECK(s.per_pair_terms[0] == doctest::Approx(0.02));
}

TEST_CASE("csc loss forgives boxes in zero-confidence cells") {
  Grid<double> cells({10, 10, 1.0}, 1.0);
  cells.at(7, 7) = 0.0;
  const scene::ConfidenceMap map{cells};
  const auto ye = testing::set_of({square({2.5, 2.5}, 0.9)});
  const auto yi = testing::set_of({square({2.5, 2.5}, 0.9), square({7.5, 7.5}, 0.9)});
  CHECK(csc_loss(ye, yi, map, {}).l_csc == doctest::Approx(0.0));
}

TEST_CASE("csc loss rejects an all-zero map") {
  const auto y = testing::set_of({square({2.5, 2.5}, 0.9)});
  CHECK_THROWS_AS(csc_loss(y, y, uniform_map(8, 0.0), {}), NumericalError);
}

TEST_CASE("csc loss properties on random sets") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    Grid<double> cells({24, 24, 1.0}, 0.0);
    for (auto& v : cells.data()) v = rng.uniform(0.0, 1.0);
    const scene::ConfidenceMap map{cells};
    const auto ye = random_set(rng, static_cast<int>(rng.integer(0, 5)), 24.0, 0);
    const auto yi = random_set(rng, static_cast<int>(rng.integer(0, 5)), 24.0, 1);
    const MatchCostParams params;

    CHECK(csc_loss(ye, ye, map, params).l_csc == doctest::Approx(0.0));

    const auto s = csc_loss(ye, yi, map, params);
    CHECK(s.l_csc >= 0.0);
    double sum = 0.0;
    for (double t : s.per_pair_terms) sum += t;
    CHECK(s.l_csc == doctest::Approx(sum));

    scene::ConfidenceMap scaled = map;
    for (auto& v : scaled.cells.data()) v *= 3.7;
    CHECK(csc_loss(ye, yi, scaled, params).l_csc == doctest::Approx(s.l_csc).epsilon(1e-9));
  }
}
