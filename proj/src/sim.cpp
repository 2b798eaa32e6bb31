#include "karma/sim.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <string>

#include "karma/hindsight.hpp"

namespace karma {

const std::vector<RoundRecord>& Trace::agent_rounds(int agent) const {
  const auto it = std::find(recorded_agents.begin(), recorded_agents.end(), agent);
  if (it == recorded_agents.end())
    throw ConfigError("trace: agent " + std::to_string(agent) + " was not recorded");
  return rounds[static_cast<std::size_t>(it - recorded_agents.begin())];
}

void StationaryConfig::validate() const {
  agent.validate();
  if (horizon < 1) throw ConfigError("stationary: horizon must be >= 1");
  if (!(time_saving >= 0.0)) throw ConfigError("stationary: time_saving must be >= 0");
}

Trace run_stationary(const StationaryConfig& config, const StreamFactory& streams) {
  config.validate();
  const int T = config.horizon;
  const double delta = config.time_saving;
  const AgentParams& params = config.agent;

  RngStream val_stream = streams.stream(0, StreamPurpose::kValuation);
  RngStream comp_stream = streams.stream(0, StreamPurpose::kCompeting);

  Trace trace;
  trace.horizon = T;
  trace.n_agents = 1;
  trace.agents.resize(1);
  trace.total_karma.reserve(T + 1);
  trace.total_multiplier.reserve(T + 1);
  if (config.record_rounds) {
    trace.recorded_agents = {0};
    trace.rounds.resize(1);
    trace.rounds[0].reserve(T);
  }

  AgentSummary& summary = trace.agents[0];
  HittingTimeTracker tracker(delta / params.mu_lo, params.mu_lo, params.mu_hi);
  AgentState state = initial_state(params);
  summary.initial_karma = state.karma;

  for (int t = 1; t <= T; ++t) {
    tracker.observe(t, state.karma, state.multiplier);
    trace.total_karma.push_back(state.karma);
    trace.total_multiplier.push_back(state.multiplier);
    summary.min_karma = std::min(summary.min_karma, state.karma);

    const double v = sample_valuation(config.valuation, val_stream);
    const CompetingPair d = sample_competing(config.competing, comp_stream);
    const double b = place_bid(config.strategy, state, v, params, delta);
    const bool won = b > d.hi;
    const double z = won ? d.hi : 0.0;
    const double g = stationary_gain(b, d, params.gain_share);
    const double saved = won ? delta * v : 0.0;
    const double cost = v - saved;

    summary.total_cost += cost;
    summary.total_saved += saved;
    summary.total_payment += z;
    summary.total_gain += g;
    summary.wins += won ? 1 : 0;

    if (config.record_rounds) {
      trace.rounds[0].push_back(
          RoundRecord{v, b, won, z, g, state.karma, state.multiplier, cost, saved, d.hi, d.lo});
    }
    state = advance(config.strategy, state, z, g, params, T);
  }

  trace.total_karma.push_back(state.karma);
  trace.total_multiplier.push_back(state.multiplier);
  summary.min_karma = std::min(summary.min_karma, state.karma);
  summary.final_karma = state.karma;
  summary.final_multiplier = state.multiplier;
  summary.hitting = tracker.result(T);
  return trace;
}

void PopulationConfig::validate() const {
  mech.validate();
  const auto n = static_cast<std::size_t>(mech.n_agents);
  if (agents.size() != n || strategies.size() != n || valuations.size() != n)
    throw ConfigError("population: agents, strategies and valuations must have n_agents entries");
  for (const auto& a : agents) a.validate();
  for (int i : recorded_agents) {
    if (i < 0 || i >= mech.n_agents) throw ConfigError("population: recorded agent out of range");
  }
  if (reference_profile && reference_profile->size() != n)
    throw ConfigError("population: reference profile must have n_agents entries");
  if (mech.n_auctions > 1) {
    // surfaces dimension errors before the first round
    (void)participation_probabilities(matching, mech.n_agents, mech.n_auctions);
  }
}

namespace {

Trace run_population(const PopulationConfig& config, const StreamFactory& streams) {
  config.validate();
  const int n = config.mech.n_agents;
  const int m_count = config.mech.n_auctions;
  const int T = config.mech.horizon;
  const double delta = config.mech.time_saving;

  std::vector<RngStream> val_streams;
  std::vector<RngStream> match_streams;
  val_streams.reserve(n);
  for (int i = 0; i < n; ++i) val_streams.push_back(streams.stream(i, StreamPurpose::kValuation));
  if (m_count > 1) {
    match_streams.reserve(n);
    for (int i = 0; i < n; ++i) match_streams.push_back(streams.stream(i, StreamPurpose::kMatching));
  }
  RngStream tie_stream = streams.stream(0, StreamPurpose::kTieBreak);

  Trace trace;
  trace.horizon = T;
  trace.n_agents = n;
  trace.agents.resize(n);
  trace.recorded_agents = config.recorded_agents;
  trace.rounds.resize(config.recorded_agents.size());
  for (auto& r : trace.rounds) r.reserve(T);
  trace.total_karma.reserve(T + 1);
  trace.total_multiplier.reserve(T + 1);
  if (config.record_multipliers) trace.multiplier_history.reserve(std::size_t(T + 1) * n);
  const std::vector<double>* reference =
      config.reference_profile ? &*config.reference_profile : nullptr;
  if (reference) trace.distance.reserve(T);

  std::vector<AgentState> states(n);
  std::vector<HittingTimeTracker> trackers;
  trackers.reserve(n);
  for (int i = 0; i < n; ++i) {
    const AgentParams& p = config.agents[i];
    states[i] = initial_state(p);
    trace.agents[i].initial_karma = states[i].karma;
    trackers.emplace_back(delta / p.mu_lo, p.mu_lo, p.mu_hi);
  }

  std::vector<double> valuations(n);
  std::vector<double> bids(n);
  std::vector<int> assignment(m_count > 1 ? n : 0);
  AuctionClearer clearer(config.mech);
  PeriodOutcome out;

  const auto snapshot = [&](int t) {
    double sum_k = 0.0;
    double sum_mu = 0.0;
    double dist = 0.0;
    for (int i = 0; i < n; ++i) {
      const AgentState& s = states[i];
      sum_k += s.karma;
      sum_mu += s.multiplier;
      AgentSummary& a = trace.agents[i];
      a.min_karma = std::min(a.min_karma, s.karma);
      if (config.record_multipliers) trace.multiplier_history.push_back(s.multiplier);
      if (reference) {
        const double e = s.multiplier - (*reference)[i];
        dist += e * e;
      }
      if (t <= T) trackers[i].observe(t, s.karma, s.multiplier);
    }
    trace.total_karma.push_back(sum_k);
    trace.total_multiplier.push_back(sum_mu);
    if (reference && t <= T) trace.distance.push_back(dist);
  };

  for (int t = 1; t <= T; ++t) {
    snapshot(t);
    for (int i = 0; i < n; ++i) {
      valuations[i] = sample_valuation(config.valuations[i], val_streams[i]);
      if (m_count > 1) assignment[i] = draw_auction(config.matching, i, m_count, match_streams[i]);
    }
    for (int i = 0; i < n; ++i)
      bids[i] = place_bid(config.strategies[i], states[i], valuations[i], config.agents[i], delta);

    clearer.clear(bids, assignment, tie_stream.next(), out);
    if (!config.redistribute) std::fill(out.gains.begin(), out.gains.end(), 0.0);

    for (std::size_t j = 0; j < config.recorded_agents.size(); ++j) {
      const int i = config.recorded_agents[j];
      const bool won = out.winners[i] != 0;
      const double saved = won ? delta * valuations[i] : 0.0;
      trace.rounds[j].push_back(RoundRecord{valuations[i], bids[i], won, out.payments[i],
                                            out.gains[i], states[i].karma, states[i].multiplier,
                                            valuations[i] - saved, saved, out.competing_hi[i],
                                            out.competing_lo[i]});
    }
    for (int i = 0; i < n; ++i) {
      AgentSummary& a = trace.agents[i];
      const bool won = out.winners[i] != 0;
      const double saved = won ? delta * valuations[i] : 0.0;
      a.total_cost += valuations[i] - saved;
      a.total_saved += saved;
      a.total_payment += out.payments[i];
      a.total_gain += out.gains[i];
      a.wins += won ? 1 : 0;
      states[i] = advance(config.strategies[i], states[i], out.payments[i], out.gains[i],
                          config.agents[i], T);
    }
  }
  snapshot(T + 1);

  for (int i = 0; i < n; ++i) {
    AgentSummary& a = trace.agents[i];
    a.final_karma = states[i].karma;
    a.final_multiplier = states[i].multiplier;
    a.hitting = trackers[i].result(T);
  }
  if (reference) {
    trace.mean_distance =
        std::accumulate(trace.distance.begin(), trace.distance.end(), 0.0) / static_cast<double>(T);
  }
  return trace;
}

}  // namespace

Trace run_simultaneous(const PopulationConfig& config, const StreamFactory& streams) {
  if (config.mech.n_auctions != 1)
    throw ConfigError("simultaneous: n_auctions must be 1; use run_parallel");
  return run_population(config, streams);
}

Trace run_parallel(const PopulationConfig& config, const StreamFactory& streams) {
  return run_population(config, streams);
}

DeviationResult run_deviation(const PopulationConfig& base, int deviator,
                              const Strategy& deviation, const StreamFactory& streams,
                              const Trace* base_trace) {
  if (deviator < 0 || deviator >= base.mech.n_agents)
    throw ConfigError("deviation: deviator index out of range");

  PopulationConfig base_cfg = base;
  if (std::find(base_cfg.recorded_agents.begin(), base_cfg.recorded_agents.end(), deviator) ==
      base_cfg.recorded_agents.end())
    base_cfg.recorded_agents.push_back(deviator);

  DeviationResult result;
  if (base_trace) {
    result.base = *base_trace;
    (void)result.base.agent_rounds(deviator);
  } else {
    result.base = run_parallel(base_cfg, streams);
  }

  Strategy beta = deviation;
  if (auto* replay = std::get_if<HindsightReplay>(&beta); replay && !replay->plan) {
    const auto& rounds = result.base.agent_rounds(deviator);
    HindsightInstance inst;
    inst.valuations.reserve(rounds.size());
    inst.competing.reserve(rounds.size());
    for (const auto& r : rounds) {
      inst.valuations.push_back(r.valuation);
      inst.competing.push_back(r.competing_hi);
    }
    inst.time_saving = base.mech.time_saving;
    inst.budget = base.agents[deviator].initial_karma;
    inst.gain_share = base.redistribute ? base.mech.gain_share() : 0.0;
    replay->plan = std::make_shared<const std::vector<double>>(solve_fractional(inst).plan);
  }

  PopulationConfig dev_cfg = base_cfg;
  dev_cfg.strategies[deviator] = beta;
  result.deviated = run_parallel(dev_cfg, streams);

  const double T = base.mech.horizon;
  result.per_period_gain =
      (result.base.agents[deviator].total_cost - result.deviated.agents[deviator].total_cost) / T;
  return result;
}

}  // namespace karma
