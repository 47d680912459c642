#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ertl/errors.hpp"
#include "ertl/metrics.hpp"
#include "ertl/rng.hpp"

using namespace ertl;

namespace {

std::vector<ScoredExample> hand_examples() {
  // scores .9 .6 .4 .1 with labels + - + -
  return {{0.9, 1, {}}, {0.6, -1, {}}, {0.4, 1, {}}, {0.1, -1, {}}};
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("confusion counts at a middle threshold") {
  const auto ex = hand_examples();
  const auto c = confusion(ex, 0.5);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  CHECK(c.tn == 1);
  CHECK(c.total() == 4);
}

TEST_CASE("extreme thresholds empty one side of the confusion table") {
  const auto ex = hand_examples();
  const auto low = confusion(ex, 0.0);  // everything predicted match
  CHECK(low.fn == 0);
  CHECK(low.tn == 0);
  CHECK(low.tp == 2);
  CHECK(low.fp == 2);
  const auto high = confusion(ex, 1.1);  // nothing predicted match
  CHECK(high.tp == 0);
  CHECK(high.fp == 0);
  CHECK(high.fn == 2);
  CHECK(high.tn == 2);
}

TEST_CASE("boundary scores count as matches") {
  const std::vector<ScoredExample> ex = {{0.5, 1, {}}, {0.5, -1, {}}};
  const auto c = confusion(ex, 0.5);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.fn == 0);
  CHECK(c.tn == 0);
}

TEST_CASE("precision and recall hand values and degenerate conventions") {
  ConfusionCounts c;
  c.tp = 2;
  c.fp = 1;
  c.fn = 1;
  c.tn = 4;
  const auto pr = precision_recall(c);
  CHECK(pr.precision == doctest::Approx(2.0 / 3.0));
  CHECK(pr.recall == doctest::Approx(2.0 / 3.0));

  ConfusionCounts none_predicted;
  none_predicted.fn = 3;
  none_predicted.tn = 2;
  CHECK(precision_recall(none_predicted).precision == 1.0);

  ConfusionCounts no_positives;
  no_positives.fp = 2;
  no_positives.tn = 5;
  CHECK(precision_recall(no_positives).recall == 1.0);
}

TEST_CASE("test error hand values and counting oracle") {
  const auto ex = hand_examples();
  CHECK(test_error(ex, 0.5) == doctest::Approx(0.5));
  const std::vector<ScoredExample> perfect = {
      {0.9, 1, {}}, {0.8, 1, {}}, {0.1, -1, {}}, {0.2, -1, {}}};
  CHECK(test_error(perfect, 0.5) == doctest::Approx(0.0));
  // Random data: compare against a direct count.
  Rng rng(123);
  std::vector<ScoredExample> random_ex;
  for (int k = 0; k < 500; ++k) {
    random_ex.push_back({rng.gaussian(), rng.uniform01() < 0.4 ? 1 : -1, {}});
  }
  for (double tau : {-0.5, 0.0, 0.7}) {
    int wrong = 0;
    for (const auto& e : random_ex) {
      const int pred = e.score - tau >= 0 ? 1 : -1;
      if (pred != e.y) ++wrong;
    }
    CHECK(test_error(random_ex, tau) ==
          doctest::Approx(static_cast<double>(wrong) / 500.0));
  }
  const std::vector<ScoredExample> empty;
  CHECK_THROWS_AS(test_error(empty, 0.0), ValidationError);
}

TEST_CASE("a perfectly separating scorer reaches precision 1 at recall 1") {
  const std::vector<ScoredExample> ex = {
      {0.9, 1, {}}, {0.8, 1, {}}, {0.3, -1, {}}, {0.1, -1, {}}};
  const auto curve = pr_curve(ex);
  bool found = false;
  for (const auto& p : curve.points) {
    if (p.recall == 1.0 && p.precision == 1.0) found = true;
  }
  CHECK(found);
}

TEST_CASE("an anti-correlated scorer degrades to the base rate") {
  // Positives score lowest: the only way to full recall is to sweep past
  // every negative, so precision at recall 1 is the base rate.
  const std::vector<ScoredExample> ex = {
      {0.1, 1, {}}, {0.2, 1, {}}, {0.8, -1, {}}, {0.9, -1, {}}};
  const auto curve = pr_curve(ex);
  double at_full = -1.0;
  for (const auto& p : curve.points) {
    if (p.recall == 1.0) at_full = std::max(at_full, p.precision);
  }
  CHECK(at_full == doctest::Approx(0.5));
}

TEST_CASE("duplicate scores collapse to one curve point") {
  const std::vector<ScoredExample> ex = {
      {0.5, 1, {}}, {0.5, -1, {}}, {0.5, 1, {}}, {0.2, -1, {}}};
  const auto curve = pr_curve(ex);
  // Distinct scores: 0.5 and 0.2 -> exactly two points.
  CHECK(curve.points.size() == 2);
  // At tau = 0.5 all three 0.5-scored examples are predicted matches.
  const auto& first = curve.points.front();
  CHECK(first.tau == doctest::Approx(0.5));
  CHECK(first.tp == 2);
  CHECK(first.fp == 1);
}

TEST_CASE("curves require at least one positive") {
  const std::vector<ScoredExample> ex = {{0.5, -1, {}}, {0.2, -1, {}}};
  CHECK_THROWS_AS(pr_curve(ex), ValidationError);
}

TEST_CASE("recall is nondecreasing and bounded on random curves") {
  std::mt19937 gen(2024);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<ScoredExample> ex;
    const int n = 2 + static_cast<int>(gen() % 40);
    bool has_pos = false;
    for (int k = 0; k < n; ++k) {
      const int y = unif(gen) < 0.5 ? 1 : -1;
      has_pos = has_pos || y == 1;
      // Coarse scores force plenty of duplicates.
      ex.push_back({std::round(unif(gen) * 8.0) / 8.0, y, {}});
    }
    if (!has_pos) {
      ex.push_back({unif(gen), 1, {}});
    }
    const auto curve = pr_curve(ex);
    REQUIRE(!curve.points.empty());
    double prev_recall = -1.0;
    for (const auto& p : curve.points) {
      CHECK(p.recall >= prev_recall);
      prev_recall = p.recall;
      CHECK(p.precision >= 0.0);
      CHECK(p.precision <= 1.0);
      CHECK(p.recall >= 0.0);
      CHECK(p.recall <= 1.0);
    }
    CHECK(curve.points.back().recall == 1.0);
  }
}

TEST_CASE("precision at a recall floor scans qualifying points only") {
  PRCurve curve;
  curve.points.push_back({0.9, 0.9, 0.8, 4, 0, 1});
  curve.points.push_back({0.5, 0.7, 0.9, 5, 2, 1});
  bool achieved = false;
  CHECK(precision_at_recall(curve, 0.85, &achieved) == doctest::Approx(0.7));
  CHECK(achieved);
  CHECK(precision_at_recall(curve, 0.75, &achieved) == doctest::Approx(0.9));
  CHECK(achieved);
  // Unreachable recall floor.
  CHECK(precision_at_recall(curve, 0.95, &achieved) == 0.0);
  CHECK(!achieved);
}

TEST_CASE("identical trial curves produce a zero-width band") {
  const std::vector<ScoredExample> ex = {
      {0.9, 1, {}}, {0.6, 1, {}}, {0.4, -1, {}}, {0.2, -1, {}}};
  const auto c = pr_curve(ex);
  const std::vector<PRCurve> curves = {c, c, c};
  const std::vector<double> grid = {0.25, 0.5, 0.75, 1.0};
  const auto band = band_curves(curves, grid);
  REQUIRE(band.recall_grid.size() == grid.size());
  for (size_t k = 0; k < grid.size(); ++k) {
    CHECK(band.lo[k] == doctest::Approx(band.mean_precision[k]));
    CHECK(band.hi[k] == doctest::Approx(band.mean_precision[k]));
  }
}

TEST_CASE("band arithmetic matches the normal approximation hand case") {
  // Two curves whose precision at the probed recall is 0.6 and 0.8:
  // mean 0.7, population std 0.1, half-width 1.96 * 0.1 / sqrt(2).
  PRCurve c1, c2;
  c1.points.push_back({0.5, 0.6, 1.0, 3, 2, 0});
  c2.points.push_back({0.5, 0.8, 1.0, 4, 1, 0});
  const std::vector<PRCurve> curves = {c1, c2};
  const std::vector<double> grid = {1.0};
  const auto band = band_curves(curves, grid);
  const double half = 1.96 * 0.1 / std::sqrt(2.0);
  CHECK(band.mean_precision[0] == doctest::Approx(0.7));
  CHECK(band.lo[0] == doctest::Approx(0.7 - half));
  CHECK(band.hi[0] == doctest::Approx(0.7 + half));
}

TEST_CASE("banding fewer than two curves is rejected") {
  const std::vector<PRCurve> one(1);
  const std::vector<double> grid = {0.5};
  CHECK_THROWS_AS(band_curves(one, grid), ValidationError);
}

TEST_CASE("bootstrap bands tighten as the sample grows") {
  auto make_scored = [](int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ScoredExample> out;
    for (int k = 0; k < n; ++k) {
      const int y = rng.uniform01() < 0.5 ? 1 : -1;
      const double s = 0.5 + 0.4 * y + 0.35 * rng.gaussian();
      out.push_back({s, y, {}});
    }
    return out;
  };
  const std::vector<double> grid = {0.5, 0.8};
  const auto small = bootstrap_band(make_scored(40, 1), grid, 200, 9);
  const auto big = bootstrap_band(make_scored(640, 1), grid, 200, 9);
  double small_width = 0.0, big_width = 0.0;
  for (size_t k = 0; k < grid.size(); ++k) {
    small_width += small.hi[k] - small.lo[k];
    big_width += big.hi[k] - big.lo[k];
  }
  CHECK(big_width < small_width);
  // Same inputs, same seed: identical bands.
  const auto again = bootstrap_band(make_scored(40, 1), grid, 200, 9);
  CHECK(again.mean_precision == small.mean_precision);
  CHECK(again.lo == small.lo);
  CHECK(again.hi == small.hi);
}

TEST_CASE("best-threshold error beats the base rate on separable data") {
  Rng rng(77);
  std::vector<ScoredExample> ex;
  int positives = 0;
  for (int k = 0; k < 200; ++k) {
    const int y = rng.uniform01() < 0.3 ? 1 : -1;
    positives += y == 1;
    ex.push_back({static_cast<double>(y) + 0.2 * rng.gaussian(), y, {}});
  }
  const double base_rate =
      std::min(positives, 200 - positives) / 200.0;
  double best = 1.0;
  for (const auto& e : ex) {
    best = std::min(best, test_error(ex, e.score));
  }
  CHECK(best <= base_rate + 1.0 / 200.0);
}

TEST_CASE("metrics are invariant to example order") {
  auto ex = hand_examples();
  const auto curve_before = pr_curve(ex);
  const double err_before = test_error(ex, 0.45);
  std::mt19937 g(55);
  for (int rep = 0; rep < 4; ++rep) {
    std::shuffle(ex.begin(), ex.end(), g);
    const auto curve_after = pr_curve(ex);
    REQUIRE(curve_after.points.size() == curve_before.points.size());
    for (size_t k = 0; k < curve_after.points.size(); ++k) {
      CHECK(curve_after.points[k].tau == curve_before.points[k].tau);
      CHECK(curve_after.points[k].precision == curve_before.points[k].precision);
      CHECK(curve_after.points[k].recall == curve_before.points[k].recall);
    }
    CHECK(test_error(ex, 0.45) == err_before);
  }
}

}  // TEST_SUITE
