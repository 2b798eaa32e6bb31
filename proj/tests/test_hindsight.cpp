#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "instances.hpp"
#include "karma/core.hpp"
#include "karma/hindsight.hpp"

using namespace karma;
using karma::testing::close;
using karma::testing::random_instance;

namespace {

HindsightInstance make(std::vector<double> v, std::vector<double> d, double delta, double budget,
                       double gs = 0.0) {
  HindsightInstance inst;
  inst.valuations = std::move(v), inst.competing = std::move(d);
  inst.time_saving = delta, inst.budget = budget, inst.gain_share = gs;
  return inst;
}

}  // namespace

TEST_CASE("two-item knapsack by hand") {
  const auto inst = make({1, 0.2}, {0.5, 0.5}, 1.0, 0.5);
  const auto sol = solve_fractional(inst);
  CHECK(sol.plan == std::vector<double>{1, 0});
  CHECK(sol.cost == doctest::Approx(0.2));
  CHECK(sol.dual_multiplier == doctest::Approx(0.4));
  const auto dual = solve_dual(inst);
  CHECK(dual.value == doctest::Approx(0.2));
  CHECK(dual.multiplier >= 0.4 - 1e-12);
  CHECK(dual.multiplier <= 2.0 + 1e-12);
  CHECK(solve_exact_01(inst) == doctest::Approx(0.2));
}

TEST_CASE("empty budget takes nothing") {
  const auto inst = make({0.3, 0.6, 0.9}, {0.2, 0.4, 0.1}, 1.0, 0.0);
  const auto sol = solve_fractional(inst);
  for (double x : sol.plan) CHECK(x == 0.0);
  CHECK(sol.cost == doctest::Approx(1.8));
  CHECK(sol.unbounded_multiplier);
  CHECK(solve_dual(inst).value == doctest::Approx(1.8));
}

TEST_CASE("slack budget takes everything") {
  const auto inst = make({0.3, 0.6, 0.9}, {0.2, 0.4, 0.1}, 0.5, 0.7);
  const auto sol = solve_fractional(inst);
  for (double x : sol.plan) CHECK(x == 1.0);
  CHECK(sol.cost == doctest::Approx(0.5 * 1.8));
  CHECK(sol.dual_multiplier == 0.0);
}

TEST_CASE("free rounds only") {
  const auto inst = make({0.3, 0.6}, {0.0, 0.0}, 5.0, 1.0);
  const auto dual = solve_dual(inst);
  CHECK(dual.multiplier == 0.0);
  CHECK(dual.value == doctest::Approx((1 - 5.0) * 0.9));
  CHECK(solve_fractional(inst).cost == doctest::Approx((1 - 5.0) * 0.9));
}

TEST_CASE("single round, exact 0/1") {
  CHECK(solve_exact_01(make({1}, {0.5}, 0.5, 0.5)) == doctest::Approx(0.5));
  CHECK(solve_exact_01(make({1}, {0.5}, 0.5, 0.4)) == doctest::Approx(1.0));
}

TEST_CASE("gains enlarge the budget") {
  const auto inst = make({1, 1}, {1, 1}, 1.0, 0.5, 0.25);
  CHECK(inst.effective_budget() == doctest::Approx(1.0));
  CHECK(solve_fractional(inst).cost == doctest::Approx(1.0));
}

TEST_CASE("primal equals dual on random instances") {
  RngStream r = StreamFactory(21, 0).stream(0, StreamPurpose::kInstance);
  for (int k = 0; k < 300; ++k) {
    const int T = 5 + int(r.next() % 196);
    const auto inst = random_instance(r, T);
    const auto primal = solve_fractional(inst);
    const auto dual = solve_dual(inst);
    CHECK(close(primal.cost, dual.value, 1e-9));
    CHECK(close(primal.cost, primal.dual_value, 1e-9));
    if (!primal.unbounded_multiplier)
      CHECK(close(dual_objective(inst, primal.dual_multiplier), primal.cost, 1e-9));
    // weak duality at arbitrary multipliers
    for (double mu : {0.0, 0.3, 2.0, 17.0})
      CHECK(dual_objective(inst, mu) <= primal.cost + 1e-9 * std::max(1.0, std::abs(primal.cost)));
    int fractional = 0;
    double spent = 0;
    for (int t = 0; t < T; ++t) {
      const double x = primal.plan[t];
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
      fractional += x > 0.0 && x < 1.0;
      spent += x * inst.competing[t];
    }
    CHECK(fractional <= 1);
    CHECK(spent <= inst.effective_budget() * (1 + 1e-12) + 1e-12);
  }
}

TEST_CASE("0/1 optimum is sandwiched by the relaxation") {
  RngStream r = StreamFactory(22, 0).stream(0, StreamPurpose::kInstance);
  for (int k = 0; k < 100; ++k) {
    const int T = 1 + int(r.next() % 14);
    const auto inst = random_instance(r, T);
    const double lp = solve_fractional(inst).cost;
    const double exact = solve_exact_01(inst);
    const double vmax = *std::max_element(inst.valuations.begin(), inst.valuations.end());
    CHECK(exact >= lp - 1e-9);
    CHECK(exact <= lp + inst.time_saving * vmax + 1e-9);
  }
}

TEST_CASE("input errors") {
  CHECK_THROWS_AS(solve_fractional(make({1, 2}, {1}, 1.0, 1.0)), ConfigError);
  CHECK_THROWS_AS(solve_fractional(make({1}, {-1}, 1.0, 1.0)), ConfigError);
  CHECK_THROWS_AS(solve_fractional(make({1}, {1}, 1.0, -1.0)), ConfigError);
  CHECK_THROWS_AS(solve_exact_01(make(std::vector<double>(23, 1.0), std::vector<double>(23, 1.0), 1, 1)),
                  ConfigError);
  CHECK_THROWS_AS(hindsight_no_gain(make({1}, {1}, 1.0, 1.0, 0.1)), ConfigError);
  CHECK(hindsight_no_gain(make({1}, {1}, 1.0, 1.0)).cost == doctest::Approx(0.0));
}
