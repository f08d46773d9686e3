#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "idbla/baselines.hpp"
#include "idbla/init_predict.hpp"
#include "test_util.hpp"

using namespace idbla;

TEST_CASE("worker_correct_rates counts agreement with the reference labels") {
  auto labels = testutil::from_dense(
      {
          {0, 0, 1},
          {1, 1, 1},
          {2, 0, -1},
      },
      3);
  std::vector<int> hard = {0, 1, 2};
  auto rates = worker_correct_rates(labels, hard);
  CHECK(rates[0] == doctest::Approx(3.0 / 3));
  CHECK(rates[1] == doctest::Approx(2.0 / 3));
  CHECK(rates[2] == doctest::Approx(1.0 / 2));
}

TEST_CASE("worker_correct_rates falls back to chance for silent workers") {
  auto labels = testutil::make_labels(2, 3, 4, {{0, 0, 1}, {1, 0, 2}});
  auto rates = worker_correct_rates(labels, {1, 2});
  CHECK(rates[0] == doctest::Approx(1.0));
  CHECK(rates[1] == doctest::Approx(0.25));
  CHECK(rates[2] == doctest::Approx(0.25));
}

TEST_CASE("label_correct_prob spans chance to certainty") {
  const int C = 5;
  CHECK(label_correct_prob(1.0, 0.0, C) == doctest::Approx(1.0 / C));
  CHECK(label_correct_prob(0.0, 7.0, C) == doctest::Approx(1.0 / C));
  CHECK(label_correct_prob(2.0, 1000.0, C) == doctest::Approx(1.0));
  // Monotone in the easiness parameter.
  double prev = 0.0;
  for (double eps = 0.0; eps <= 5.0; eps += 0.25) {
    double p = label_correct_prob(1.3, eps, C);
    CHECK(p >= prev);
    prev = p;
  }
  // Hand value: 1 / (1 + 4 exp(-2)).
  CHECK(label_correct_prob(2.0, 1.0, C) == doctest::Approx(1.0 / (1.0 + 4.0 * std::exp(-2.0))));
}

TEST_CASE("difficulty_objective gradient matches finite differences") {
  auto labels = testutil::from_dense(
      {
          {0, 0, 1, 0},
          {1, 2, 1, -1},
      },
      3);
  std::vector<int> hard = {0, 1};
  std::vector<double> abilities = {2.0, 1.1, 0.4, 3.0};
  for (int item = 0; item < 2; ++item) {
    for (double eps : {0.0, 0.3, 1.0, 2.5}) {
      const double h = 1e-6;
      auto lo = difficulty_objective(labels, item, hard, abilities, eps);
      auto hi = difficulty_objective(labels, item, hard, abilities, eps + h);
      double fd = (hi.value - lo.value) / h;
      auto mid = difficulty_objective(labels, item, hard, abilities, eps + h / 2);
      CHECK(mid.gradient == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("fit_difficulties lands on boundaries when the slope never turns") {
  // Item 0: everyone agrees with the reference label, so larger epsilon always
  // helps and the fit pegs at the cap. Item 1: everyone disagrees, so zero.
  auto labels = testutil::from_dense(
      {
          {0, 0, 0},
          {1, 2, 1},
      },
      3);
  std::vector<int> hard = {0, 0};
  std::vector<double> abilities = {0.9, 0.8, 0.7};
  auto fit = fit_difficulties(labels, hard, abilities);
  CHECK(fit.epsilons[0] == doctest::Approx(1e3));
  CHECK(fit.epsilons[1] == doctest::Approx(0.0));
  CHECK(fit.converged[0] == 1);
  CHECK(fit.converged[1] == 1);
}

TEST_CASE("fit_difficulties finds the interior stationary point") {
  // Mixed agreement puts the optimum strictly inside (0, cap).
  auto labels = testutil::from_dense(
      {
          {0, 0, 0, 1, 2},
      },
      3);
  std::vector<int> hard = {0};
  std::vector<double> abilities = {1.5, 0.9, 0.8, 1.2, 1.0};
  auto fit = fit_difficulties(labels, hard, abilities);
  REQUIRE(fit.converged[0] == 1);
  const double eps = fit.epsilons[0];
  CHECK(eps > 0.0);
  CHECK(eps < 1e3);
  auto at = difficulty_objective(labels, 0, hard, abilities, eps);
  CHECK(std::abs(at.gradient) < 1e-6);
  // Local maximum: nearby values do not beat it.
  for (double d : {-0.05, 0.05}) {
    if (eps + d < 0) continue;
    auto nb = difficulty_objective(labels, 0, hard, abilities, eps + d);
    CHECK(nb.value <= at.value + 1e-12);
  }
}

TEST_CASE("assign_levels splits by difficulty into near-equal groups") {
  // Larger epsilon = easier. Items sorted by difficulty: index 3 hardest.
  std::vector<double> eps = {5.0, 1.0, 3.0, 0.2, 4.0, 2.0, 0.5};
  auto levels = assign_levels(eps, 3);
  REQUIRE(levels.size() == eps.size());
  // Sizes 3, 2, 2 easiest to hardest.
  std::vector<int> counts(3, 0);
  for (int h : levels) ++counts[h];
  CHECK(counts == std::vector<int>{3, 2, 2});
  // The three easiest items (eps 5, 4, 3) get level 0; the two hardest (0.5,
  // 0.2) get level 2.
  CHECK(levels[0] == 0);
  CHECK(levels[4] == 0);
  CHECK(levels[2] == 0);
  CHECK(levels[6] == 2);
  CHECK(levels[3] == 2);
  CHECK(levels[1] == 1);
  CHECK(levels[5] == 1);
}

TEST_CASE("assign_levels breaks ties by item index") {
  std::vector<double> eps = {1.0, 1.0, 1.0, 1.0};
  auto levels = assign_levels(eps, 2);
  CHECK(levels == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("assign_levels rejects more levels than items") {
  CHECK_THROWS_AS(assign_levels({1.0, 2.0}, 3), DataError);
  CHECK_THROWS_AS(assign_levels({1.0}, 0), DataError);
}

TEST_CASE("glad_init wires the whole pipeline together") {
  SynthConfig cfg;
  cfg.num_items = 90;
  cfg.num_workers = 15;
  // Dense enough that this seeded draw leaves no item unlabeled.
  cfg.participation_low = 0.3;
  cfg.participation_high = 0.5;
  cfg.seed = 33;
  auto data = generate_synthetic(cfg);
  const int H = 4;
  auto init = glad_init(data.labels, H, 4.0, 33);

  CHECK(init.hard_labels == majority_vote(data.labels, 33));
  REQUIRE(init.levels.size() == static_cast<std::size_t>(cfg.num_items));
  std::vector<int> counts(H, 0);
  for (int h : init.levels) {
    CHECK(h >= 0);
    CHECK(h < H);
    ++counts[h];
  }
  auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  CHECK(*hi - *lo <= 1);
  for (std::size_t k = 0; k < init.abilities.size(); ++k)
    CHECK(init.abilities[k] == doctest::Approx(4.0 * init.correct_rates[k]));
  for (double e : init.epsilons) {
    CHECK(e >= 0.0);
    CHECK(e <= 1e3);
  }
  // Deterministic for a fixed seed.
  auto again = glad_init(data.labels, H, 4.0, 33);
  CHECK(again.hard_labels == init.hard_labels);
  CHECK(again.levels == init.levels);
  CHECK(again.epsilons == init.epsilons);
}

TEST_CASE("glad_init ranks unanimous items easier than contested ones") {
  // Item 0 unanimous, item 1 a 2-1 split, item 2 fully contested.
  auto labels = testutil::from_dense(
      {
          {0, 0, 0},
          {1, 1, 2},
          {0, 1, 2},
      },
      3);
  auto init = glad_init(labels, 3, 4.0, 1);
  CHECK(init.epsilons[0] > init.epsilons[1]);
  CHECK(init.epsilons[1] >= init.epsilons[2]);
  CHECK(init.levels[0] == 0);
  CHECK(init.levels[2] == 2);
}

TEST_CASE("random_init is uniform-range and seed-deterministic") {
  auto labels = testutil::make_labels(50, 4, 3, {{0, 0, 1}, {49, 3, 2}});
  auto a = random_init(labels, 5, 9);
  auto b = random_init(labels, 5, 9);
  CHECK(a.hard_labels == b.hard_labels);
  CHECK(a.levels == b.levels);
  for (int c : a.hard_labels) {
    CHECK(c >= 0);
    CHECK(c < 3);
  }
  for (int h : a.levels) {
    CHECK(h >= 0);
    CHECK(h < 5);
  }
  auto c = random_init(labels, 5, 10);
  CHECK_FALSE(a.hard_labels == c.hard_labels);
}
