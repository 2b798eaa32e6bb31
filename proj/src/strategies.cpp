#include "karma/strategies.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "karma/detail/overloaded.hpp"

namespace karma {

using detail::Overloaded;

AgentState initial_state(const AgentParams& params) {
  return AgentState{params.initial_karma, params.initial_multiplier, 1};
}

ScaledDeviation::ScaledDeviation(double factor_, LearnerKind base_) : factor(factor_), base(base_) {
  if (!(factor > 0.0)) throw ConfigError("scaled deviation: factor must be positive");
}

TruthfulCapped::TruthfulCapped(double multiplier_) : multiplier(multiplier_) {
  if (!(multiplier > 0.0)) throw ConfigError("truthful capped: multiplier must be positive");
}

namespace {

const char* learner_name(LearnerKind k) {
  switch (k) {
    case LearnerKind::kKarmaPacing: return "K";
    case LearnerKind::kAdaptivePacing: return "A";
    case LearnerKind::kAdaptivePacingWithGain: return "A+gain";
  }
  return "?";
}

double learner_bid(LearnerKind kind, const AgentState& state, double v, const AgentParams& params,
                   double delta) {
  switch (kind) {
    case LearnerKind::kKarmaPacing: return bid_karma_pacing(state, v, params, delta);
    case LearnerKind::kAdaptivePacing: return bid_adaptive_pacing(state, v, delta);
    case LearnerKind::kAdaptivePacingWithGain: return bid_adaptive_pacing_with_gain(state, v, delta);
  }
  return 0.0;
}

AgentState learner_update(LearnerKind kind, const AgentState& state, double z, double g,
                          const AgentParams& params, int horizon) {
  const double eps = step_at(params.step, state.round, horizon);
  switch (kind) {
    case LearnerKind::kKarmaPacing: return update_karma_pacing(state, z, g, eps);
    case LearnerKind::kAdaptivePacing:
      return update_adaptive_pacing(state, z, g, eps, params.target_rate, params.mu_lo,
                                    params.mu_hi);
    case LearnerKind::kAdaptivePacingWithGain:
      return update_adaptive_pacing_with_gain(state, z, g, eps, params.target_rate, params.mu_hi);
  }
  return state;
}

AgentState settle_only(const AgentState& state, double z, double g) {
  return AgentState{state.karma - z + g, state.multiplier, state.round + 1};
}

}  // namespace

std::string strategy_name(const Strategy& strategy) {
  return std::visit(Overloaded{
                        [](const KarmaPacing&) { return std::string("K"); },
                        [](const AdaptivePacing&) { return std::string("A"); },
                        [](const AdaptivePacingWithGain&) { return std::string("A+gain"); },
                        [](const ScaledDeviation& s) {
                          std::ostringstream os;
                          os << "scaled(" << s.factor << "," << learner_name(s.base) << ")";
                          return os.str();
                        },
                        [](const HindsightReplay&) { return std::string("hindsight"); },
                        [](const TruthfulCapped& s) {
                          std::ostringstream os;
                          os << "truthful(" << s.multiplier << ")";
                          return os.str();
                        },
                    },
                    strategy);
}

double bid_karma_pacing(const AgentState& state, double valuation, const AgentParams& params,
                        double time_saving) {
  const double mu = std::clamp(state.multiplier, params.mu_lo, params.mu_hi);
  return std::max(0.0, std::min(time_saving * valuation / mu, state.karma));
}

AgentState update_karma_pacing(const AgentState& state, double payment, double gain, double eps) {
  return AgentState{state.karma - payment + gain, state.multiplier + eps * (payment - gain),
                    state.round + 1};
}

double bid_adaptive_pacing(const AgentState& state, double valuation, double time_saving) {
  if (state.karma <= 0.0) return 0.0;
  return std::min(time_saving * valuation / state.multiplier, state.karma);
}

AgentState update_adaptive_pacing(const AgentState& state, double payment, double gain_credit,
                                  double eps, double rho, double mu_lo, double mu_hi) {
  const double mu = std::clamp(state.multiplier + eps * (payment - rho), mu_lo, mu_hi);
  return AgentState{state.karma - payment + gain_credit, mu, state.round + 1};
}

double bid_adaptive_pacing_with_gain(const AgentState& state, double valuation,
                                     double time_saving) {
  return std::max(0.0, std::min(time_saving * valuation / (1.0 + state.multiplier), state.karma));
}

AgentState update_adaptive_pacing_with_gain(const AgentState& state, double payment, double gain,
                                            double eps, double rho, double mu_hi) {
  const double mu = std::clamp(state.multiplier + eps * (payment - gain - rho), 0.0, mu_hi);
  return AgentState{state.karma - payment + gain, mu, state.round + 1};
}

double place_bid(const Strategy& strategy, const AgentState& state, double valuation,
                 const AgentParams& params, double time_saving) {
  return std::visit(
      Overloaded{
          [&](const KarmaPacing&) {
            return bid_karma_pacing(state, valuation, params, time_saving);
          },
          [&](const AdaptivePacing&) { return bid_adaptive_pacing(state, valuation, time_saving); },
          [&](const AdaptivePacingWithGain&) {
            return bid_adaptive_pacing_with_gain(state, valuation, time_saving);
          },
          [&](const ScaledDeviation& s) {
            // unscaled bid without the cap, then scale and cap
            AgentState uncapped = state;
            uncapped.karma = std::numeric_limits<double>::infinity();
            const double raw = learner_bid(s.base, uncapped, valuation, params, time_saving);
            return std::max(0.0, std::min(s.factor * raw, state.karma));
          },
          [&](const HindsightReplay& h) {
            if (!h.plan) throw ConfigError("hindsight replay: plan not set");
            const auto t = static_cast<std::size_t>(state.round - 1);
            const bool win = t < h.plan->size() && (*h.plan)[t] >= 0.5;
            return win ? std::max(0.0, state.karma) : 0.0;
          },
          [&](const TruthfulCapped& s) {
            return std::max(0.0, std::min(time_saving * valuation / s.multiplier, state.karma));
          },
      },
      strategy);
}

AgentState advance(const Strategy& strategy, const AgentState& state, double payment,
                   double gain, const AgentParams& params, int horizon) {
  return std::visit(
      Overloaded{
          [&](const KarmaPacing&) {
            return learner_update(LearnerKind::kKarmaPacing, state, payment, gain, params, horizon);
          },
          [&](const AdaptivePacing&) {
            return learner_update(LearnerKind::kAdaptivePacing, state, payment, gain, params,
                                  horizon);
          },
          [&](const AdaptivePacingWithGain&) {
            return learner_update(LearnerKind::kAdaptivePacingWithGain, state, payment, gain,
                                  params, horizon);
          },
          [&](const ScaledDeviation& s) {
            return learner_update(s.base, state, payment, gain, params, horizon);
          },
          [&](const HindsightReplay&) { return settle_only(state, payment, gain); },
          [&](const TruthfulCapped&) { return settle_only(state, payment, gain); },
      },
      strategy);
}

HittingTimes hitting_time(std::span<const double> karma, std::span<const double> multiplier,
                          double time_saving, double mu_lo, double mu_hi) {
  if (karma.empty() || karma.size() != multiplier.size())
    throw ConfigError("hitting_time: empty or mismatched trace");
  HittingTimeTracker tracker(time_saving / mu_lo, mu_lo, mu_hi);
  for (std::size_t t = 0; t < karma.size(); ++t)
    tracker.observe(static_cast<int>(t + 1), karma[t], multiplier[t]);
  return tracker.result(static_cast<int>(karma.size()));
}

void HittingTimeTracker::observe(int round, double karma, double multiplier) {
  if (first_bad_karma_ == 0 && karma < karma_floor_) first_bad_karma_ = round;
  if (first_bad_lo_ == 0 && multiplier < mu_lo_) first_bad_lo_ = round;
  if (first_bad_hi_ == 0 && multiplier > mu_hi_) first_bad_hi_ = round;
}

HittingTimes HittingTimeTracker::result(int horizon) const {
  const auto last_good = [horizon](int first_bad) { return first_bad == 0 ? horizon : first_bad - 1; };
  HittingTimes h;
  h.karma = last_good(first_bad_karma_);
  h.mu_lo = last_good(first_bad_lo_);
  h.mu_hi = last_good(first_bad_hi_);
  h.overall = std::min({h.karma, h.mu_lo, h.mu_hi});
  return h;
}

}  // namespace karma
