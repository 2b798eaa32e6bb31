#pragma once

#include <vector>

namespace karma {

// One realized sample path for a single agent. The relaxed benchmark lets the
// agent spend `budget + gain_share * sum(competing)` over the whole horizon,
// i.e. it may run a temporary deficit and always collects the maximal gain.
struct HindsightInstance {
  std::vector<double> valuations;
  std::vector<double> competing;  // d^gamma per round
  double time_saving = 1.0;
  double budget = 0.0;      // rho * T, the initial karma
  double gain_share = 0.0;  // gamma / N; zero without redistribution

  void validate() const;
  int horizon() const { return static_cast<int>(valuations.size()); }
  // Total spendable karma of the relaxed problem.
  double effective_budget() const;
};

struct HindsightSolution {
  std::vector<double> plan;  // x_t in [0, 1]; at most one fractional entry
  double cost = 0.0;         // sum v_t (1 - x_t Delta)
  double dual_multiplier = 0.0;
  double dual_value = 0.0;
  bool unbounded_multiplier = false;  // no budget at all: sup attained only as mu -> inf
};

// LP relaxation as a fractional knapsack: rounds with zero competing bid are
// free and taken first, the rest greedily by Delta v / d (earlier index wins
// ties). The reported multiplier is the ratio of the first round not taken in
// full, or zero when the budget is slack.
HindsightSolution solve_fractional(const HindsightInstance& inst);

struct DualSolution {
  double multiplier = 0.0;
  double value = 0.0;
  bool unbounded_multiplier = false;
};

// Evaluates mu -> sum_t [v_t - mu (rho + s d_t) - (Delta v_t - mu d_t)^+] at
// every breakpoint and returns the best one.
DualSolution solve_dual(const HindsightInstance& inst);

// Value of the dual objective at a given multiplier.
double dual_objective(const HindsightInstance& inst, double multiplier);

// Exact 0/1 optimum by enumeration; only for horizon <= 22.
double solve_exact_01(const HindsightInstance& inst);

// Benchmark without redistribution; requires gain_share == 0.
HindsightSolution hindsight_no_gain(const HindsightInstance& inst);

}  // namespace karma
