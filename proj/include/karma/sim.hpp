#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "karma/auction.hpp"
#include "karma/core.hpp"
#include "karma/rng.hpp"
#include "karma/strategies.hpp"

namespace karma {

// One agent in one round. karma and multiplier are the state at the start of
// the round, i.e. before this round's settlement and update.
struct RoundRecord {
  double valuation = 0.0;
  double bid = 0.0;
  bool won = false;
  double payment = 0.0;
  double gain = 0.0;
  double karma = 0.0;
  double multiplier = 0.0;
  double cost = 0.0;   // v (1 - x Delta), negative for winners when Delta > 1
  double saved = 0.0;  // x Delta v
  double competing_hi = 0.0;
  double competing_lo = 0.0;
};

struct AgentSummary {
  double total_cost = 0.0;
  double total_saved = 0.0;
  double total_payment = 0.0;
  double total_gain = 0.0;
  double initial_karma = 0.0;
  double final_karma = 0.0;
  double final_multiplier = 0.0;
  double min_karma = std::numeric_limits<double>::infinity();
  long long wins = 0;
  HittingTimes hitting;
};

struct Trace {
  int horizon = 0;
  int n_agents = 0;
  std::vector<int> recorded_agents;
  std::vector<std::vector<RoundRecord>> rounds;  // rounds[j][t-1] for recorded_agents[j]
  std::vector<AgentSummary> agents;
  std::vector<double> total_karma;       // at the start of t = 1..T+1
  std::vector<double> total_multiplier;  // at the start of t = 1..T+1
  std::vector<double> multiplier_history;  // optional, row t-1 holds all agents, t = 1..T+1
  std::vector<double> distance;            // ||mu_t - reference||^2 for t = 1..T, if requested
  double mean_distance = std::numeric_limits<double>::quiet_NaN();

  // Throws ConfigError if the agent was not recorded.
  const std::vector<RoundRecord>& agent_rounds(int agent) const;
};

// Single agent facing competing bids drawn i.i.d. from a fixed distribution.
struct StationaryConfig {
  AgentParams agent;
  Strategy strategy = KarmaPacing{};
  ValuationModel valuation = ContinuousUniform(0.0, 1.0);
  CompetingBidModel competing = IidPair{ContinuousUniform(0.0, 1.0), false};
  double time_saving = 1.0;
  int horizon = 1;
  bool record_rounds = true;

  void validate() const;
};

// Valuations from streams (agent 0, valuation) and (agent 0, competing).
Trace run_stationary(const StationaryConfig& config, const StreamFactory& streams);

struct PopulationConfig {
  MechanismParams mech;
  std::vector<AgentParams> agents;
  std::vector<Strategy> strategies;
  std::vector<ValuationModel> valuations;
  MatchingModel matching = UniformMatching{};
  bool redistribute = true;  // false forces every gain to zero
  std::vector<int> recorded_agents;
  std::optional<std::vector<double>> reference_profile;
  bool record_multipliers = false;

  void validate() const;
};

// All agents in one auction every round; requires n_auctions == 1.
Trace run_simultaneous(const PopulationConfig& config, const StreamFactory& streams);

// Each agent joins one of n_auctions per round according to the matching
// model; payments from all auctions are pooled for redistribution. With one
// auction this produces exactly the run_simultaneous trace.
Trace run_parallel(const PopulationConfig& config, const StreamFactory& streams);

struct DeviationResult {
  Trace base;
  Trace deviated;
  double per_period_gain = 0.0;  // (C_i under base - C_i under deviation) / T
};

// Replays the same random draws with agent `deviator` switched to `deviation`.
// A HindsightReplay without a plan gets the fractional hindsight plan of the
// deviator's base sample path. `base_trace`, when given, must come from
// run_parallel(base, streams) with the deviator recorded.
DeviationResult run_deviation(const PopulationConfig& base, int deviator,
                              const Strategy& deviation, const StreamFactory& streams,
                              const Trace* base_trace = nullptr);

}  // namespace karma
