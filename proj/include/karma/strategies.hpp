#pragma once

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "karma/core.hpp"

namespace karma {

struct AgentState {
  double karma = 0.0;
  double multiplier = 1.0;  // not projected under karma pacing
  int round = 1;
};

AgentState initial_state(const AgentParams& params);

// Bid Delta v / clamp(mu), capped by karma; multiplier moves with z - g and
// is never projected.
struct KarmaPacing {};

// Bid Delta v / mu, capped by karma; multiplier tracks the target rate and is
// projected onto [mu_lo, mu_hi].
struct AdaptivePacing {};

// Monetary-style variant: bid Delta v / (1 + mu), multiplier tracks
// z - g - rho and is projected onto [0, mu_hi].
struct AdaptivePacingWithGain {};

enum class LearnerKind { kKarmaPacing, kAdaptivePacing, kAdaptivePacingWithGain };

// Base learner with its bid scaled by `factor` before the karma cap.
struct ScaledDeviation {
  ScaledDeviation(double factor, LearnerKind base);
  double factor;
  LearnerKind base;
};

// Replays a precomputed hindsight plan: all-in when the plan wins round t,
// zero otherwise. A null plan asks the deviation harness to derive it.
struct HindsightReplay {
  std::shared_ptr<const std::vector<double>> plan;
};

// Fixed-multiplier bidding, min(Delta v / multiplier, k); never learns.
struct TruthfulCapped {
  explicit TruthfulCapped(double multiplier);
  double multiplier;
};

using Strategy = std::variant<KarmaPacing, AdaptivePacing, AdaptivePacingWithGain,
                              ScaledDeviation, HindsightReplay, TruthfulCapped>;

std::string strategy_name(const Strategy& strategy);

double bid_karma_pacing(const AgentState& state, double valuation, const AgentParams& params,
                        double time_saving);
AgentState update_karma_pacing(const AgentState& state, double payment, double gain, double eps);

double bid_adaptive_pacing(const AgentState& state, double valuation, double time_saving);
// The multiplier ignores gains; `gain_credit` is still added to the budget
// when the mechanism redistributes.
AgentState update_adaptive_pacing(const AgentState& state, double payment, double gain_credit,
                                  double eps, double rho, double mu_lo, double mu_hi);

double bid_adaptive_pacing_with_gain(const AgentState& state, double valuation,
                                     double time_saving);
AgentState update_adaptive_pacing_with_gain(const AgentState& state, double payment,
                                            double gain, double eps, double rho, double mu_hi);

double place_bid(const Strategy& strategy, const AgentState& state, double valuation,
                 const AgentParams& params, double time_saving);

AgentState advance(const Strategy& strategy, const AgentState& state, double payment,
                   double gain, const AgentParams& params, int horizon);

// Hitting times, 1-based. Each component is the last t such that the
// condition held for every s <= t (0 if it already fails at s = 1).
struct HittingTimes {
  int karma = 0;
  int mu_lo = 0;
  int mu_hi = 0;
  int overall = 0;
};

// karma[t-1], multiplier[t-1] are the states at the start of round t.
HittingTimes hitting_time(std::span<const double> karma, std::span<const double> multiplier,
                          double time_saving, double mu_lo, double mu_hi);

// Online version used by the simulation engines.
class HittingTimeTracker {
 public:
  HittingTimeTracker(double karma_floor, double mu_lo, double mu_hi)
      : karma_floor_(karma_floor), mu_lo_(mu_lo), mu_hi_(mu_hi) {}

  void observe(int round, double karma, double multiplier);
  HittingTimes result(int horizon) const;

 private:
  double karma_floor_;
  double mu_lo_;
  double mu_hi_;
  int first_bad_karma_ = 0;
  int first_bad_lo_ = 0;
  int first_bad_hi_ = 0;
};

}  // namespace karma
