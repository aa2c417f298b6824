#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "bevguard/core/error.hpp"
#include "bevguard/core/rng.hpp"
#include "bevguard/stattest/stattest.hpp"
#include "oracles.hpp"

using namespace bevguard;
using namespace bevguard::stattest;

namespace {

std::vector<double> sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<RawScore> raw_scores(Rng& rng, int n, double shift = 0.0) {
  std::vector<RawScore> out;
  for (int i = 0; i < n; ++i) out.push_back({rng.uniform(0.0, 1.0) + shift, rng.uniform(0.0, 2.0) + shift, true});
  return out;
}

}  // namespace

TEST_CASE("combined score examples") {
  CHECK(combined_score(0.2, 0.3, {1.0, 1.0}) == doctest::Approx(0.5));
  CHECK(combined_score(0.2, 0.3, {2.0, 0.0}) == doctest::Approx(0.4));
  CHECK(combined_score(0.2, 0.3, {0.0, 1.0}) == doctest::Approx(0.3));
  CHECK_THROWS_AS((ScoreWeights{0.0, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((ScoreWeights{-1.0, 1.0}.validate()), ConfigError);
}

TEST_CASE("conformal p-value examples") {
  const std::vector<double> s{1, 2, 3, 4};
  CHECK(conformal_p(2.5, s) == doctest::Approx(0.6));
  CHECK(conformal_p(9.0, s) == doctest::Approx(0.2));
  CHECK(conformal_p(1.0, s) == doctest::Approx(1.0));
  CHECK(conformal_p(-3.0, s) == doctest::Approx(1.0));
  // Ties count toward the numerator.
  CHECK(conformal_p(3.0, s) == doctest::Approx(0.6));

  Rng rng(4);
  std::vector<double> cal(50);
  for (auto& v : cal) v = rng.normal();
  cal = sorted(cal);
  double prev = 1.0;
  for (double x = -4.0; x <= 4.0; x += 0.01) {
    const double p = conformal_p(x, cal);
    CHECK(p <= prev);
    CHECK(p >= 1.0 / 51.0);
    prev = p;
  }
}

TEST_CASE("benjamini-hochberg examples") {
  const auto r = bh_select({0.01, 0.04, 0.2}, 0.1);
  CHECK(r.rejected == std::vector<bool>{true, true, false});
  CHECK(r.cutoff == 2);
  CHECK(r.threshold == doctest::Approx(0.04));

  const auto none = bh_select({1.0, 1.0, 1.0}, 0.1);
  CHECK(none.cutoff == 0);
  CHECK(std::none_of(none.rejected.begin(), none.rejected.end(), [](bool b) { return b; }));

  CHECK(bh_select({0.1}, 0.1).rejected[0]);
  CHECK_FALSE(bh_select({0.1000001}, 0.1).rejected[0]);

  // Step-up: a later order statistic can pull earlier ones in.
  CHECK(bh_select({0.04, 0.05}, 0.1).rejected == std::vector<bool>{true, true});
}

TEST_CASE("benjamini-hochberg equals the direct rule on random p-vectors") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 1 + static_cast<int>(rng.integer(0, 11));
    std::vector<double> p(static_cast<std::size_t>(m));
    for (auto& v : p) {
      // Mix of small values, discrete conformal grid values and ties.
      const double u = rng.uniform();
      v = u < 0.3 ? rng.uniform(0.0, 0.05) : u < 0.6 ? std::ceil(rng.uniform(0.0, 1.0) * 20.0) / 20.0 : rng.uniform();
    }
    const double alpha = trial % 2 ? 0.1 : 0.2;
    const auto got = bh_select(p, alpha);
    CHECK(got.rejected == oracle::reference_bh(p, alpha));
    // Downward closed and the single-test reduction.
    for (int a = 0; a < m; ++a) {
      for (int b = 0; b < m; ++b) {
        if (p[a] < p[b] && got.rejected[b]) CHECK(got.rejected[a]);
      }
    }
    if (m == 1) CHECK(got.rejected[0] == (p[0] <= alpha));
  }
}

TEST_CASE("rejections are invariant under a strictly increasing transform") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> cal(40), scores(5);
    for (auto& v : cal) v = rng.uniform(0.0, 3.0);
    for (auto& v : scores) v = rng.uniform(0.0, 4.0);
    auto transform = [](double x) { return std::exp(2.0 * x) + x * x * x; };
    std::vector<double> cal_t, scores_t;
    for (double v : cal) cal_t.push_back(transform(v));
    for (double v : scores) scores_t.push_back(transform(v));
    cal = sorted(cal);
    cal_t = sorted(cal_t);
    std::vector<double> p, p_t;
    for (double v : scores) p.push_back(conformal_p(v, cal));
    for (double v : scores_t) p_t.push_back(conformal_p(v, cal_t));
    CHECK(p == p_t);
    CHECK(bh_select(p, 0.2).rejected == bh_select(p_t, 0.2).rejected);
  }
}

TEST_CASE("conformal p-values are super-uniform on exchangeable scores") {
  Rng rng(2024);
  std::vector<RawScore> raw = raw_scores(rng, 400);
  const auto cal = make_calibration(raw, {1}, "gcp", {});
  const auto held_out = raw_scores(rng, 4000);
  for (double t : {0.05, 0.1, 0.25, 0.5}) {
    std::size_t hits = 0;
    for (const auto& r : held_out) hits += conformal_p(st_score(r, cal.normalizer, cal.weights), cal) <= t;
    CHECK(static_cast<double>(hits) / static_cast<double>(held_out.size()) <= t + 0.03);
  }
}

TEST_CASE("normalizer and spatial-only scoring") {
  const std::vector<RawScore> raw{{0.0, 1.0, true}, {2.0, 5.0, true}, {1.0, 3.0, false}};
  const auto n = fit_normalizer(raw);
  CHECK(n.csc(1.0) == doctest::Approx(0.5));
  CHECK(n.ta(3.0) == doctest::Approx(0.5));
  const RawScore spatial_only{1.0, 100.0, false};
  CHECK(st_score(spatial_only, n, {1.0, 1.0}) == doctest::Approx(0.5));
  CHECK(st_score({1.0, 3.0, true}, n, {1.0, 2.0}) == doctest::Approx(1.5));
  CHECK_THROWS_AS(make_calibration({}, {}, "gcp", {}), ConfigError);
}

TEST_CASE("calibration sets are sorted and survive a save-load round trip") {
  Rng rng(5);
  const auto cal = make_calibration(raw_scores(rng, 30), {7, 8}, "gcp-t", {0.0, 1.0});
  CHECK(std::is_sorted(cal.scores.begin(), cal.scores.end()));
  const auto path = (std::filesystem::temp_directory_path() / "bevguard_cal_test.json").string();
  save_calibration(cal, path);
  const auto back = load_calibration(path);
  std::filesystem::remove(path);
  CHECK(back.scores == cal.scores);
  CHECK(back.seeds == cal.seeds);
  CHECK(back.variant == "gcp-t");
  CHECK(back.weights.omega_s == 0.0);
  CHECK(back.normalizer.ta_max == cal.normalizer.ta_max);
}

TEST_CASE("trust quarantines for the verdict frame only") {
  TrustState s;
  AnomalyVerdict none;
  none.frame = 10;
  none.agents = {{1}, {2}};
  const auto same = update_trust(s, none);
  CHECK(same.quarantined_frame.empty());
  CHECK(same.log.empty());

  AnomalyVerdict v = none;
  v.agents[0].rejected = true;
  const auto q = update_trust(s, v);
  CHECK(q.quarantined(1, 10));
  CHECK_FALSE(q.quarantined(1, 11));
  CHECK_FALSE(q.quarantined(2, 10));
  REQUIRE(q.log.size() == 1);
  CHECK(q.log[0].agent == 1);
  CHECK(q.log[0].frame == 10);

  const auto twice = update_trust(q, v);
  CHECK(twice.quarantined_frame == q.quarantined_frame);
  CHECK(twice.log.size() == 1);
}

TEST_CASE("weight fit keeps the earliest grid entry on ties and prefers the informative score") {
  Rng rng(8);
  const auto cal = raw_scores(rng, 200);
  std::vector<LabeledScore> val;
  for (int i = 0; i < 100; ++i) val.push_back({{rng.uniform(0.0, 1.0), rng.uniform(0.0, 2.0), true}, false});
  // Attacks separate only on the temporal score.
  for (int i = 0; i < 20; ++i) val.push_back({{rng.uniform(0.0, 1.0), rng.uniform(3.0, 4.0), true}, true});
  const std::vector<ScoreWeights> grid{{1, 0}, {0, 1}, {1, 1}};
  const auto fit = fit_weights(cal, val, grid, 0.1);
  CHECK(fit.weights.omega_s == 0.0);
  CHECK(fit.weights.omega_t == 1.0);
  CHECK(fit.f1 > 0.9);

  const std::vector<LabeledScore> clean(val.begin(), val.begin() + 100);
  const auto tie = fit_weights(cal, clean, grid, 0.1);
  CHECK(tie.weights.omega_s == 1.0);
  CHECK(tie.weights.omega_t == 0.0);
}
