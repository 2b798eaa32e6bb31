#include "karma/hindsight.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "karma/core.hpp"

namespace karma {

void HindsightInstance::validate() const {
  if (valuations.empty()) throw ConfigError("hindsight: empty horizon");
  if (valuations.size() != competing.size())
    throw ConfigError("hindsight: valuations and competing bids differ in length");
  if (!(time_saving >= 0.0) || !(budget >= 0.0) || !(gain_share >= 0.0))
    throw ConfigError("hindsight: negative parameter");
  for (std::size_t t = 0; t < valuations.size(); ++t) {
    if (!(valuations[t] >= 0.0) || !(competing[t] >= 0.0))
      throw ConfigError("hindsight: negative valuation or competing bid");
  }
}

double HindsightInstance::effective_budget() const {
  return budget + gain_share * std::accumulate(competing.begin(), competing.end(), 0.0);
}

HindsightSolution solve_fractional(const HindsightInstance& inst) {
  inst.validate();
  const std::size_t T = inst.valuations.size();
  const double delta = inst.time_saving;
  double remaining = inst.effective_budget();
  // absorbs round-off when the budget exactly covers an item
  const double slack = 1e-12 * std::max(1.0, remaining);

  HindsightSolution sol;
  sol.plan.assign(T, 0.0);

  std::vector<std::size_t> priced;
  priced.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    if (inst.competing[t] == 0.0)
      sol.plan[t] = 1.0;
    else
      priced.push_back(t);
  }
  const auto ratio = [&](std::size_t t) { return delta * inst.valuations[t] / inst.competing[t]; };
  std::stable_sort(priced.begin(), priced.end(),
                   [&](std::size_t a, std::size_t b) { return ratio(a) > ratio(b); });

  sol.dual_multiplier = 0.0;
  for (std::size_t k = 0; k < priced.size(); ++k) {
    const std::size_t t = priced[k];
    const double d = inst.competing[t];
    if (d <= remaining + slack) {
      sol.plan[t] = 1.0;
      remaining = std::max(0.0, remaining - d);
      continue;
    }
    sol.plan[t] = std::max(0.0, remaining / d);
    sol.dual_multiplier = ratio(t);
    remaining = 0.0;
    break;
  }

  double cost = 0.0;
  for (std::size_t t = 0; t < T; ++t) cost += inst.valuations[t] * (1.0 - sol.plan[t] * delta);
  sol.cost = cost;

  if (inst.effective_budget() == 0.0 && !priced.empty()) {
    const auto dual = solve_dual(inst);
    sol.unbounded_multiplier = dual.unbounded_multiplier;
    sol.dual_multiplier = dual.multiplier;
    sol.dual_value = dual.value;
  } else {
    sol.dual_value = dual_objective(inst, sol.dual_multiplier);
  }
  return sol;
}

double dual_objective(const HindsightInstance& inst, double multiplier) {
  const double delta = inst.time_saving;
  double value = -multiplier * inst.effective_budget();
  for (std::size_t t = 0; t < inst.valuations.size(); ++t) {
    const double v = inst.valuations[t];
    value += v - std::max(delta * v - multiplier * inst.competing[t], 0.0);
  }
  return value;
}

DualSolution solve_dual(const HindsightInstance& inst) {
  inst.validate();
  const std::size_t T = inst.valuations.size();
  const double delta = inst.time_saving;
  const double budget = inst.effective_budget();

  // The objective is concave and piecewise linear in mu with kinks at
  // Delta v_t / d_t; sweep the kinks in decreasing order keeping the sums of
  // the rounds still "won" at the current mu.
  double sum_v = 0.0;
  double free_value = 0.0;  // rounds with d = 0 are won for every mu
  struct Kink {
    double mu;
    double value;  // Delta v
    double price;  // d
  };
  std::vector<Kink> kinks;
  kinks.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double v = inst.valuations[t];
    const double d = inst.competing[t];
    sum_v += v;
    if (d == 0.0)
      free_value += delta * v;
    else
      kinks.push_back({delta * v / d, delta * v, d});
  }

  if (budget == 0.0) {
    // nondecreasing in mu; the supremum is only approached as mu -> inf
    return DualSolution{std::numeric_limits<double>::infinity(), sum_v - free_value, true};
  }

  std::sort(kinks.begin(), kinks.end(), [](const Kink& a, const Kink& b) { return a.mu > b.mu; });

  DualSolution best{0.0, -std::numeric_limits<double>::infinity(), false};
  double won_value = 0.0;
  double won_price = 0.0;
  std::size_t k = 0;
  while (k < kinks.size()) {
    const double mu = kinks[k].mu;
    // rounds with ratio strictly above mu are won; equal ratios contribute zero
    const double value = sum_v - free_value - mu * budget - (won_value - mu * won_price);
    if (value > best.value) best = {mu, value, false};
    while (k < kinks.size() && kinks[k].mu == mu) {
      won_value += kinks[k].value;
      won_price += kinks[k].price;
      ++k;
    }
  }
  const double at_zero = sum_v - free_value - won_value;
  if (at_zero >= best.value) best = {0.0, at_zero, false};
  return best;
}

double solve_exact_01(const HindsightInstance& inst) {
  inst.validate();
  const int T = inst.horizon();
  if (T > 22) throw ConfigError("solve_exact_01: horizon too large for enumeration");
  const double budget = inst.effective_budget();
  const double tol = 1e-12 * (1.0 + budget);
  const double delta = inst.time_saving;

  double best_saved = 0.0;
  // depth-first over include/exclude; sums are rebuilt along each path
  const auto search = [&](auto&& self, int t, double spent, double saved) -> void {
    if (t == T) {
      best_saved = std::max(best_saved, saved);
      return;
    }
    const double d = inst.competing[t];
    if (spent + d <= budget + tol) self(self, t + 1, spent + d, saved + delta * inst.valuations[t]);
    self(self, t + 1, spent, saved);
  };
  search(search, 0, 0.0, 0.0);

  const double sum_v = std::accumulate(inst.valuations.begin(), inst.valuations.end(), 0.0);
  return sum_v - best_saved;
}

HindsightSolution hindsight_no_gain(const HindsightInstance& inst) {
  if (inst.gain_share != 0.0) throw ConfigError("hindsight_no_gain: gain share must be zero");
  return solve_fractional(inst);
}

}  // namespace karma
