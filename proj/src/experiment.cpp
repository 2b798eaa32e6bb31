#include "karma/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "karma/hindsight.hpp"

namespace karma {

namespace {

constexpr const char* kStationaryRegret = "stationary-regret";
constexpr const char* kSimultaneous = "simultaneous-convergence";
constexpr const char* kNashGap = "parallel-nash-gap";
constexpr const char* kHittingTime = "hitting-time";
constexpr const char* kFixedBudget = "fixed-budget-variable-eps";
constexpr const char* kDiscrete = "discrete-valuations";
constexpr const char* kEpisode = "episode-comparison";

// Shared defaults of the experimental protocol.
Json defaults() {
  return Json{
      {"time_saving", 5.0},
      {"mu_bounds", {0.1, 1000.0}},
      {"strategy", "K"},
      {"initial_multiplier", 5.0},
      {"step", {{"kind", "horizon-power"}, {"coef", 1.0}, {"exponent", -0.5}}},
      {"budget", {{"kind", "horizon-power"}, {"coef", 3.0}, {"exponent", 0.5}}},
      {"valuation", {{"kind", "uniform"}, {"lo", 0.0}, {"hi", 1.0}}},
      {"competing",
       {{"marginal", {{"kind", "uniform"}, {"lo", 0.0}, {"hi", 1.0}}},
        {"price_setter_allowed", false}}},
      {"gain_share", 0.0},
      {"population",
       {{"n_agents", 50}, {"capacity", 5}, {"n_auctions", 1}, {"redistribute", true},
        {"matching", "uniform"}}},
  };
}

[[noreturn]] void fail(const std::string& what) { throw ConfigError(what); }

const Json& need(const Json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) fail(std::string("missing field '") + key + "'");
  return obj.at(key);
}

double number(const Json& obj, const char* key) {
  const Json& v = need(obj, key);
  if (!v.is_number()) fail(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

int integer(const Json& obj, const char* key) {
  const Json& v = need(obj, key);
  if (!v.is_number_integer()) fail(std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

std::string text(const Json& obj, const char* key) {
  const Json& v = need(obj, key);
  if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

ValuationModel parse_valuation(const Json& j) {
  const std::string kind = text(j, "kind");
  if (kind == "uniform") return ContinuousUniform(number(j, "lo"), number(j, "hi"));
  if (kind == "discrete") return DiscreteUniform(integer(j, "levels"));
  if (kind == "geometric") return Geometric(number(j, "p"));
  if (kind == "constant") return Constant(number(j, "value"));
  fail("unknown valuation kind '" + kind + "'");
}

CompetingBidModel parse_competing(const Json& j) {
  if (j.contains("pairs")) {
    std::vector<CompetingPair> pairs;
    for (const auto& p : j.at("pairs")) {
      if (!p.is_array() || p.size() != 2) fail("competing pairs must be [hi, lo]");
      pairs.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return EmpiricalPairs(std::move(pairs));
  }
  IidPair m{parse_valuation(need(j, "marginal")), false};
  if (j.contains("price_setter_allowed")) m.price_setter_allowed = j.at("price_setter_allowed").get<bool>();
  return m;
}

StepSchedule parse_step(const Json& j) {
  const std::string kind = text(j, "kind");
  if (kind == "fixed") return FixedStep(number(j, "eps"));
  if (kind == "power-law") return PowerLawStep(number(j, "coef"), number(j, "exponent"));
  if (kind == "horizon-power") return HorizonPowerStep(number(j, "coef"), number(j, "exponent"));
  fail("unknown step kind '" + kind + "'");
}

double parse_budget(const Json& j, int horizon) {
  const std::string kind = text(j, "kind");
  double k = 0.0;
  if (kind == "fixed")
    k = number(j, "value");
  else if (kind == "horizon-power")
    k = number(j, "coef") * std::pow(double(horizon), number(j, "exponent"));
  else if (kind == "target-rate")
    k = number(j, "rate") * horizon;
  else
    fail("unknown budget kind '" + kind + "'");
  if (!(k >= 0.0)) fail("initial budget must be nonnegative");
  return k;
}

LearnerKind parse_learner(const std::string& name) {
  if (name == "K") return LearnerKind::kKarmaPacing;
  if (name == "A") return LearnerKind::kAdaptivePacing;
  if (name == "A+gain") return LearnerKind::kAdaptivePacingWithGain;
  fail("unknown strategy '" + name + "'");
}

Strategy learner_strategy(LearnerKind k) {
  switch (k) {
    case LearnerKind::kKarmaPacing: return KarmaPacing{};
    case LearnerKind::kAdaptivePacing: return AdaptivePacing{};
    case LearnerKind::kAdaptivePacingWithGain: return AdaptivePacingWithGain{};
  }
  return KarmaPacing{};
}

Strategy parse_strategy(const Json& j) {
  if (j.is_string()) return learner_strategy(parse_learner(j.get<std::string>()));
  const std::string kind = text(j, "kind");
  if (kind == "scaled") {
    const std::string base = j.contains("base") ? text(j, "base") : "K";
    return ScaledDeviation(number(j, "factor"), parse_learner(base));
  }
  if (kind == "truthful") return TruthfulCapped(number(j, "multiplier"));
  if (kind == "hindsight") return HindsightReplay{};
  return learner_strategy(parse_learner(kind));
}

LearnerKind learner_of(const Json& config) {
  const Json& s = need(config, "strategy");
  return parse_learner(s.is_string() ? s.get<std::string>() : text(s, "kind"));
}

AgentParams agent_params(const Json& config, int horizon, double initial_multiplier) {
  AgentParams p;
  const Json& bounds = need(config, "mu_bounds");
  if (!bounds.is_array() || bounds.size() != 2) fail("mu_bounds must be [lo, hi]");
  p.mu_lo = bounds[0].get<double>();
  p.mu_hi = bounds[1].get<double>();
  p.initial_karma = parse_budget(need(config, "budget"), horizon);
  p.initial_multiplier = initial_multiplier;
  p.step = parse_step(need(config, "step"));
  p.target_rate = p.initial_karma / horizon;
  p.gain_share = number(config, "gain_share");
  p.validate();
  return p;
}

std::vector<double> initial_profile(const Json& config, int n_agents) {
  const Json& m = need(config, "initial_multiplier");
  std::vector<double> out(n_agents);
  if (m.is_number()) {
    std::fill(out.begin(), out.end(), m.get<double>());
  } else if (m.is_array() && !m.empty()) {
    // contiguous equal blocks, e.g. [5, 6] gives the first half 5
    const auto blocks = m.size();
    for (int i = 0; i < n_agents; ++i)
      out[i] = m[static_cast<std::size_t>(i) * blocks / n_agents].get<double>();
  } else {
    fail("initial_multiplier must be a number or a non-empty array");
  }
  return out;
}

MatchingModel parse_matching(const Json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "uniform") return UniformMatching{};
    fail("unknown matching '" + j.get<std::string>() + "'");
  }
  if (j.contains("fixed")) return FixedMatching{j.at("fixed").get<std::vector<int>>()};
  if (j.contains("custom"))
    return CustomMatching{j.at("custom").get<std::vector<std::vector<double>>>()};
  fail("matching must be \"uniform\", {\"fixed\": [...]} or {\"custom\": [[...]]}");
}

std::string setting_of(const std::string& kind, const Json& config) {
  if (kind == kStationaryRegret || kind == kEpisode) return "stationary";
  if (kind == kNashGap) return "deviation";
  if (kind == kDiscrete) {
    const std::string s = config.contains("setting") ? text(config, "setting") : "stationary";
    if (s != "stationary" && s != "simultaneous") fail("setting must be stationary or simultaneous");
    return s;
  }
  return "simultaneous";
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

int worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("KARMA_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

template <class F>
void parallel_for(std::size_t n, int workers, F&& body) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < n;) {
      try {
        body(k);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  const int threads = static_cast<int>(std::min<std::size_t>(workers, n));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

std::uint64_t horizon_seed(std::uint64_t seed, int horizon) {
  return mix64(seed ^ mix64(static_cast<std::uint64_t>(horizon)));
}

using Stats = std::vector<std::pair<std::string, double>>;

// ---------------------------------------------------------------------------
// Per-replication statistics.

Stats stationary_stats(const Json& config, int T, const StreamFactory& streams) {
  StationaryConfig sc = build_stationary(config, T);
  const Trace trace = run_stationary(sc, streams);
  const HindsightInstance inst =
      hindsight_instance(trace, 0, sc.time_saving, sc.agent.initial_karma, sc.agent.gain_share);
  const double hindsight = solve_fractional(inst).cost;
  const AgentSummary& a = trace.agents[0];
  return {
      {"regret", (a.total_cost - hindsight) / T},
      {"cost_per_period", a.total_cost / T},
      {"hindsight_cost_per_period", hindsight / T},
      {"saved_per_period", a.total_saved / T},
      {"final_multiplier", a.final_multiplier},
      {"final_karma", a.final_karma},
      {"hitting_full", a.hitting.overall == T ? 1.0 : 0.0},
      {"hitting_ratio", double(a.hitting.overall) / T},
  };
}

double max_relative_drift(const std::vector<double>& series) {
  const double ref = series.front();
  double worst = 0.0;
  for (double x : series) worst = std::max(worst, std::abs(x - ref));
  return ref != 0.0 ? worst / std::abs(ref) : worst;
}

Trace run_population_config(const PopulationConfig& pc, const StreamFactory& streams) {
  return pc.mech.n_auctions == 1 ? run_simultaneous(pc, streams) : run_parallel(pc, streams);
}

Stats population_stats(const Json& config, int T, const StreamFactory& streams,
                       const std::optional<std::vector<double>>& reference) {
  PopulationConfig pc = build_population(config, T);
  pc.reference_profile = reference;
  const Trace trace = run_population_config(pc, streams);
  const int n = pc.mech.n_agents;

  double mu_sum = 0.0, mu_min = trace.agents[0].final_multiplier, mu_max = mu_min;
  double hit = 0.0, hit_lo = 0.0, cost = 0.0;
  bool all_full = true;
  for (const auto& a : trace.agents) {
    mu_sum += a.final_multiplier;
    mu_min = std::min(mu_min, a.final_multiplier);
    mu_max = std::max(mu_max, a.final_multiplier);
    hit += double(a.hitting.overall) / T;
    hit_lo += double(a.hitting.mu_lo) / T;
    cost += a.total_cost / T;
    all_full = all_full && a.hitting.overall == T;
  }
  Stats out;
  if (reference) out.push_back({"mean_distance", trace.mean_distance});
  out.push_back({"final_mean_multiplier", mu_sum / n});
  out.push_back({"final_multiplier_spread", mu_max - mu_min});
  out.push_back({"hitting_full", all_full ? 1.0 : 0.0});
  out.push_back({"hitting_ratio", hit / n});
  out.push_back({"hitting_lo_ratio", hit_lo / n});
  out.push_back({"karma_drift", max_relative_drift(trace.total_karma)});
  out.push_back({"multiplier_drift", max_relative_drift(trace.total_multiplier)});
  out.push_back({"cost_per_period", cost / n});
  return out;
}

struct FamilyMember {
  std::string label;
  Strategy strategy;
};

std::vector<FamilyMember> deviation_family(const Json& config) {
  const Json& dev = need(config, "deviation");
  std::vector<FamilyMember> family;
  for (const auto& m : need(dev, "family")) {
    const std::string label = text(m, "label");
    if (label.find_first_of(",\"\n") != std::string::npos) fail("family labels must be CSV-safe");
    family.push_back({label, parse_strategy(m)});
  }
  if (family.empty()) fail("deviation family is empty");
  return family;
}

Stats deviation_stats(const Json& config, int T, const StreamFactory& streams) {
  PopulationConfig pc = build_population(config, T);
  const Json& dev = need(config, "deviation");
  const int deviator = dev.contains("deviator") ? integer(dev, "deviator") : 0;
  if (deviator < 0 || deviator >= pc.mech.n_agents) fail("deviator index out of range");
  pc.recorded_agents = {deviator};
  const Trace base = run_parallel(pc, streams);

  Stats out;
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& m : deviation_family(config)) {
    const DeviationResult r = run_deviation(pc, deviator, m.strategy, streams, &base);
    out.push_back({"gain_" + m.label, r.per_period_gain});
    worst = std::max(worst, r.per_period_gain);
  }
  out.push_back({"max_gain", worst});
  return out;
}

Stats episode_stats(const Json& config, int T, const StreamFactory& streams) {
  StationaryConfig sc = build_stationary(config, T);
  const Trace trace = run_stationary(sc, streams);
  const AgentSummary& a = trace.agents[0];
  const auto& rounds = trace.rounds[0];
  // multiplier path mu_1..mu_{T+1}
  std::vector<double> path;
  path.reserve(T + 1);
  for (const auto& r : rounds) path.push_back(r.multiplier);
  path.push_back(a.final_multiplier);
  int first_zero = T + 2;
  for (int t = 0; t <= T; ++t)
    if (path[t] == 0.0) {
      first_zero = t + 1;
      break;
    }
  int late_zero = 0;
  double late_max = 0.0;
  const int half = T / 2;
  for (int t = half; t <= T; ++t) {
    late_zero += path[t] == 0.0;
    late_max = std::max(late_max, path[t]);
  }
  const double late_n = T + 1 - half;
  return {
      {"saved_total", a.total_saved},
      {"saved_per_period", a.total_saved / T},
      {"final_multiplier", a.final_multiplier},
      {"final_karma", a.final_karma},
      {"first_zero_round", double(first_zero)},
      {"late_zero_fraction", late_zero / late_n},
      {"late_max_multiplier", late_max},
  };
}

Stats hindsight_episode_stats(const Json& config, int T, const StreamFactory& streams) {
  StationaryConfig sc = build_stationary(config, T);
  const Trace trace = run_stationary(sc, streams);
  const HindsightInstance inst =
      hindsight_instance(trace, 0, sc.time_saving, sc.agent.initial_karma, sc.agent.gain_share);
  const HindsightSolution sol = solve_fractional(inst);
  double saved = 0.0;
  for (int t = 0; t < T; ++t) saved += sol.plan[t] * sc.time_saving * inst.valuations[t];
  return {
      {"saved_total", saved},
      {"saved_per_period", saved / T},
      {"final_multiplier", sol.dual_multiplier},
  };
}

std::vector<std::string> slope_stats(const std::string& kind, const std::string& setting) {
  if (kind == kStationaryRegret) return {"regret"};
  if (kind == kDiscrete) return {setting == "stationary" ? "regret" : "mean_distance"};
  if (kind == kSimultaneous || kind == kFixedBudget || kind == kHittingTime) return {"mean_distance"};
  if (kind == kNashGap) return {"max_gain"};
  return {};
}

std::optional<std::vector<double>> fixed_reference(const Json& config, int n_agents) {
  if (!config.contains("reference")) {
    // symmetric all-K populations with redistribution sit on the hyperplane
    if (learner_of(config) == LearnerKind::kKarmaPacing &&
        need(need(config, "population"), "redistribute").get<bool>()) {
      const auto mu = initial_profile(config, n_agents);
      return std::vector<double>(n_agents, hyperplane_multiplier(mu));
    }
    return std::nullopt;
  }
  const Json& r = config.at("reference");
  if (r.is_array()) {
    auto v = r.get<std::vector<double>>();
    if (v.size() != static_cast<std::size_t>(n_agents)) fail("reference profile length");
    return v;
  }
  const std::string kind = r.get<std::string>();
  if (kind == "hyperplane") {
    const auto mu = initial_profile(config, n_agents);
    return std::vector<double>(n_agents, hyperplane_multiplier(mu));
  }
  if (kind == "none" || kind == "largest-horizon") return std::nullopt;
  fail("unknown reference '" + kind + "'");
}

bool wants_largest_horizon(const Json& config) {
  return config.contains("reference") && config.at("reference").is_string() &&
         config.at("reference").get<std::string>() == "largest-horizon";
}

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {kStationaryRegret, kSimultaneous, kNashGap,
                                                 kHittingTime,      kFixedBudget,  kDiscrete,
                                                 kEpisode};
  return kinds;
}

std::vector<int> default_horizons() { return {100, 316, 1000, 3162, 10000, 31623, 100000}; }

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentSpec parse_spec(const Json& doc) {
  if (!doc.is_object()) fail("spec must be a JSON object");
  ExperimentSpec spec;
  spec.raw = doc;
  spec.name = doc.contains("name") ? text(doc, "name") : "experiment";
  spec.kind = text(doc, "kind");
  const auto& kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), spec.kind) == kinds.end())
    fail("unknown experiment kind '" + spec.kind + "'");
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) fail("seed must be a nonnegative integer");
    spec.seed = doc.at("seed").get<std::uint64_t>();
  }
  if (doc.contains("replications")) spec.replications = integer(doc, "replications");
  if (spec.replications < 1) fail("replications must be >= 1");

  Json base = defaults();
  Json patch = doc;
  for (const char* key : {"name", "kind", "seed", "replications", "series", "description"})
    patch.erase(key);
  base.merge_patch(patch);

  std::vector<std::pair<std::string, Json>> patches;
  if (doc.contains("series")) {
    for (const auto& s : doc.at("series")) {
      const std::string label = text(s, "label");
      if (label.find_first_of(",\"\n") != std::string::npos) fail("series labels must be CSV-safe");
      patches.emplace_back(label, s.contains("patch") ? s.at("patch") : Json::object());
    }
    if (patches.empty()) fail("series list is empty");
  } else {
    patches.emplace_back("base", Json::object());
  }

  std::set<std::string> seen;
  for (auto& [label, p] : patches) {
    if (!seen.insert(label).second) fail("duplicate series label '" + label + "'");
    if (label == "hindsight" && spec.kind == kEpisode) fail("series label 'hindsight' is reserved");
    SeriesSpec s;
    s.label = label;
    s.config = base;
    s.config.merge_patch(p);
    s.horizons = s.config.contains("horizons") ? s.config.at("horizons").get<std::vector<int>>()
                                               : default_horizons();
    if (s.horizons.empty()) fail("series '" + label + "' has no horizons");
    for (int T : s.horizons)
      if (T < 1) fail("horizons must be positive");
    std::sort(s.horizons.begin(), s.horizons.end());
    s.horizons.erase(std::unique(s.horizons.begin(), s.horizons.end()), s.horizons.end());

    // build once at the smallest horizon to surface configuration errors early
    const std::string setting = setting_of(spec.kind, s.config);
    if (setting == "stationary") {
      (void)build_stationary(s.config, s.horizons.front());
    } else {
      const PopulationConfig pc = build_population(s.config, s.horizons.front());
      if (setting == "deviation") (void)deviation_family(s.config);
      (void)fixed_reference(s.config, pc.mech.n_agents);
    }
    spec.series.push_back(std::move(s));
  }
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open spec '" + path.string() + "'");
  Json doc;
  try {
    doc = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    fail("cannot parse '" + path.string() + "': " + e.what());
  }
  return parse_spec(doc);
}

StationaryConfig build_stationary(const Json& config, int horizon) {
  try {
    StationaryConfig sc;
    const Json& mu = need(config, "initial_multiplier");
    if (!mu.is_number()) fail("stationary settings take a single initial_multiplier");
    sc.agent = agent_params(config, horizon, mu.get<double>());
    sc.strategy = parse_strategy(need(config, "strategy"));
    sc.valuation = parse_valuation(need(config, "valuation"));
    sc.competing = parse_competing(need(config, "competing"));
    sc.time_saving = number(config, "time_saving");
    sc.horizon = horizon;
    sc.validate();
    return sc;
  } catch (const Json::exception& e) {
    fail(std::string("bad stationary config: ") + e.what());
  }
}

PopulationConfig build_population(const Json& config, int horizon) {
  try {
    const Json& pop = need(config, "population");
    PopulationConfig pc;
    pc.mech.n_agents = integer(pop, "n_agents");
    pc.mech.capacity = integer(pop, "capacity");
    pc.mech.n_auctions = pop.contains("n_auctions") ? integer(pop, "n_auctions") : 1;
    pc.mech.time_saving = number(config, "time_saving");
    pc.mech.horizon = horizon;
    pc.mech.validate();
    pc.redistribute = pop.contains("redistribute") ? pop.at("redistribute").get<bool>() : true;
    pc.matching = parse_matching(pop.contains("matching") ? pop.at("matching") : Json("uniform"));

    const int n = pc.mech.n_agents;
    const auto mu = initial_profile(config, n);
    const Strategy strategy = parse_strategy(need(config, "strategy"));
    const ValuationModel valuation = parse_valuation(need(config, "valuation"));
    for (int i = 0; i < n; ++i) {
      pc.agents.push_back(agent_params(config, horizon, mu[i]));
      pc.strategies.push_back(strategy);
      pc.valuations.push_back(valuation);
    }
    pc.validate();
    return pc;
  } catch (const Json::exception& e) {
    fail(std::string("bad population config: ") + e.what());
  }
}

const StatRow& SweepResult::row(const std::string& series, int horizon,
                                const std::string& stat) const {
  for (const auto& g : grid) {
    if (g.series != series || g.horizon != horizon) continue;
    for (const auto& r : rows)
      if (r.grid_id == g.id && r.stat == stat) return r;
  }
  fail("no row for series '" + series + "', T=" + std::to_string(horizon) + ", stat '" + stat +
       "'");
}

SweepResult run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
  const int reps = options.replications.value_or(spec.replications);
  if (reps < 1) fail("replications must be >= 1");
  const int workers = worker_count(options.workers);

  std::vector<const SeriesSpec*> series;
  for (const auto& s : spec.series) {
    if (options.only_series.empty() ||
        std::find(options.only_series.begin(), options.only_series.end(), s.label) !=
            options.only_series.end())
      series.push_back(&s);
  }
  if (series.empty()) fail("no series selected");

  // Profiles reached at the largest horizon stand in for the stationary
  // profile where no closed form is available.
  std::map<std::string, std::vector<double>> learned_reference;
  for (const SeriesSpec* s : series) {
    if (setting_of(spec.kind, s->config) != "simultaneous" || !wants_largest_horizon(s->config))
      continue;
    const int T = s->horizons.back();
    const PopulationConfig pc = build_population(s->config, T);
    std::vector<std::vector<double>> finals(reps);
    parallel_for(reps, workers, [&](std::size_t r) {
      const Trace tr = run_population_config(pc, StreamFactory(horizon_seed(spec.seed, T), r));
      finals[r].reserve(tr.agents.size());
      for (const auto& a : tr.agents) finals[r].push_back(a.final_multiplier);
    });
    std::vector<double> mean(pc.mech.n_agents, 0.0);
    for (const auto& f : finals)
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += f[i] / reps;
    learned_reference[s->label] = std::move(mean);
  }

  SweepResult result;
  struct PointJob {
    const SeriesSpec* series;
    int horizon;
    bool hindsight = false;
    std::optional<std::vector<double>> reference;
  };
  std::vector<PointJob> jobs;
  for (const SeriesSpec* s : series) {
    for (int T : s->horizons) {
      PointJob job{s, T, false, std::nullopt};
      const std::string setting = setting_of(spec.kind, s->config);
      if (setting == "simultaneous") {
        const auto it = learned_reference.find(s->label);
        job.reference = it != learned_reference.end()
                            ? std::optional(it->second)
                            : fixed_reference(s->config, need(need(s->config, "population"),
                                                               "n_agents").get<int>());
      }
      const int id = static_cast<int>(result.grid.size());
      result.grid.push_back(
          {id, s->label, T, fnv1a_hex(s->config.dump() + "|T=" + std::to_string(T))});
      jobs.push_back(std::move(job));
    }
  }
  if (spec.kind == kEpisode) {
    // hindsight on the common sample path of the first series
    for (int T : series.front()->horizons) {
      const int id = static_cast<int>(result.grid.size());
      result.grid.push_back({id, "hindsight", T,
                             fnv1a_hex(series.front()->config.dump() + "|hindsight|T=" +
                                       std::to_string(T))});
      jobs.push_back({series.front(), T, true, std::nullopt});
    }
  }

  std::vector<std::vector<Stats>> stats(jobs.size(), std::vector<Stats>(reps));
  parallel_for(jobs.size() * reps, workers, [&](std::size_t k) {
    const std::size_t j = k / reps;
    const int r = static_cast<int>(k % reps);
    const PointJob& job = jobs[j];
    const Json& cfg = job.series->config;
    const StreamFactory streams(horizon_seed(spec.seed, job.horizon), r);
    const std::string setting = setting_of(spec.kind, cfg);
    if (spec.kind == kEpisode)
      stats[j][r] = job.hindsight ? hindsight_episode_stats(cfg, job.horizon, streams)
                                  : episode_stats(cfg, job.horizon, streams);
    else if (setting == "stationary")
      stats[j][r] = stationary_stats(cfg, job.horizon, streams);
    else if (setting == "deviation")
      stats[j][r] = deviation_stats(cfg, job.horizon, streams);
    else
      stats[j][r] = population_stats(cfg, job.horizon, streams, job.reference);
  });

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const Stats& first = stats[j][0];
    for (std::size_t s = 0; s < first.size(); ++s) {
      std::vector<double> values(reps);
      for (int r = 0; r < reps; ++r) {
        if (stats[j][r].size() != first.size() || stats[j][r][s].first != first[s].first)
          throw std::logic_error("statistics differ between replications");
        values[r] = stats[j][r][s].second;
      }
      const GridPoint& g = result.grid[j];
      result.rows.push_back({g.id, g.horizon, g.param_hash, first[s].first, summarize(values)});
    }
  }

  for (const SeriesSpec* s : series) {
    if (s->horizons.size() < 3) continue;
    for (const std::string& stat : slope_stats(spec.kind, setting_of(spec.kind, s->config))) {
      std::vector<double> xs, ys;
      for (int T : s->horizons) {
        xs.push_back(T);
        ys.push_back(result.row(s->label, T, stat).summary.mean);
      }
      if (std::all_of(ys.begin(), ys.end(), [](double y) { return y > 0.0; }))
        result.slopes.push_back({s->label, stat, fit_loglog_slope(xs, ys)});
    }
  }

  if (spec.kind == kEpisode) {
    // per-round series of replication 0 at the largest horizon
    for (const SeriesSpec* s : series) {
      const int T = s->horizons.back();
      const StreamFactory streams(horizon_seed(spec.seed, T), 0);
      StationaryConfig sc = build_stationary(s->config, T);
      const Trace tr = run_stationary(sc, streams);
      const auto& rounds = tr.rounds[0];
      double cum = 0.0;
      for (int t = 1; t <= T; ++t) {
        cum += rounds[t - 1].saved;
        const bool last = t == T;
        result.episode.push_back({t, s->label, cum,
                                  last ? tr.agents[0].final_multiplier : rounds[t].multiplier,
                                  last ? tr.agents[0].final_karma : rounds[t].karma});
      }
      if (s == series.front()) {
        const HindsightInstance inst = hindsight_instance(
            tr, 0, sc.time_saving, sc.agent.initial_karma, sc.agent.gain_share);
        const HindsightSolution sol = solve_fractional(inst);
        double hcum = 0.0;
        double karma = sc.agent.initial_karma;
        std::vector<EpisodeRow> h;
        for (int t = 1; t <= T; ++t) {
          const double x = sol.plan[t - 1];
          hcum += x * sc.time_saving * inst.valuations[t - 1];
          karma += sc.agent.gain_share * inst.competing[t - 1] - x * inst.competing[t - 1];
          h.push_back({t, "hindsight", hcum, sol.dual_multiplier, karma});
        }
        result.episode.insert(result.episode.end(), h.begin(), h.end());
      }
    }
  }
  return result;
}

void write_results_csv(const SweepResult& result, std::ostream& os) {
  os << "grid_id,T,param_hash,stat_name,mean,ci_lo,ci_hi,n_reps\n";
  for (const auto& r : result.rows) {
    os << r.grid_id << ',' << r.horizon << ',' << r.param_hash << ',' << r.stat << ','
       << format_double(r.summary.mean) << ',' << format_double(r.summary.ci_lo) << ','
       << format_double(r.summary.ci_hi) << ',' << r.summary.n << '\n';
  }
}

void write_slopes_csv(const SweepResult& result, std::ostream& os) {
  os << "series,stat_name,slope,std_error,intercept,n_points\n";
  for (const auto& s : result.slopes) {
    os << s.series << ',' << s.stat << ',' << format_double(s.fit.slope) << ','
       << format_double(s.fit.std_error) << ',' << format_double(s.fit.intercept) << ','
       << s.fit.n_points << '\n';
  }
}

void write_episode_csv(const SweepResult& result, std::ostream& os) {
  os << "t,strategy,cumulative_saved,multiplier,karma\n";
  for (const auto& e : result.episode) {
    os << e.round << ',' << e.label << ',' << format_double(e.cumulative_saved) << ','
       << format_double(e.multiplier) << ',' << format_double(e.karma) << '\n';
  }
}

void write_outputs(const ExperimentSpec& spec, const SweepResult& result,
                   const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "'");

  const auto write = [&](const char* name, auto&& body) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write '" + (dir / name).string() + "'");
    body(out);
    if (!out) throw std::runtime_error("write failed for '" + (dir / name).string() + "'");
  };
  write("results.csv", [&](std::ostream& os) { write_results_csv(result, os); });
  write("slopes.csv", [&](std::ostream& os) { write_slopes_csv(result, os); });
  if (spec.kind == kEpisode)
    write("episode.csv", [&](std::ostream& os) { write_episode_csv(result, os); });

  Json manifest;
  manifest["name"] = spec.name;
  manifest["kind"] = spec.kind;
  manifest["seed"] = spec.seed;
  manifest["replications"] = result.rows.empty() ? spec.replications : result.rows.front().summary.n;
  manifest["version"] = KARMA_VERSION;
  manifest["spec"] = spec.raw;
  Json grid = Json::array();
  for (const auto& g : result.grid)
    grid.push_back({{"grid_id", g.id}, {"series", g.series}, {"T", g.horizon},
                    {"param_hash", g.param_hash}});
  manifest["grid"] = grid;
  Json series = Json::array();
  for (const auto& s : spec.series) series.push_back({{"label", s.label}, {"config", s.config}});
  manifest["series"] = series;
  write("manifest.json", [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
}

std::vector<SeriesReport> validate_spec(const ExperimentSpec& spec, bool simulate) {
  std::vector<SeriesReport> reports;
  for (const auto& s : spec.series) {
    const int T = s.horizons.back();
    const std::string setting = setting_of(spec.kind, s.config);
    AssumptionInputs in;
    in.learner = learner_of(s.config);
    in.horizon = T;
    in.time_saving = number(s.config, "time_saving");
    in.valuation = parse_valuation(need(s.config, "valuation"));

    const Json& budget = need(s.config, "budget");
    const std::string bkind = text(budget, "kind");
    if (bkind == "horizon-power")
      in.karma_exponent = number(budget, "exponent");
    else if (bkind == "target-rate")
      in.karma_exponent = 1.0;
    const Json& step = need(s.config, "step");
    if (text(step, "kind") != "fixed") in.step_exponent = number(step, "exponent");

    if (setting == "stationary") {
      const StationaryConfig sc = build_stationary(s.config, T);
      in.setting = Setting::kStationary;
      in.mu_lo = sc.agent.mu_lo;
      in.mu_hi = sc.agent.mu_hi;
      in.initial_multiplier = sc.agent.initial_multiplier;
      in.initial_karma = sc.agent.initial_karma;
      in.gain_share = sc.agent.gain_share;
      in.eps = step_at(sc.agent.step, 1, T);
      in.competing = sc.competing;
      if (in.learner == LearnerKind::kKarmaPacing) {
        RngStream stream(derive_seed(spec.seed, 0, 0, StreamPurpose::kEstimation));
        RootSearchOptions opt;
        opt.mu_lo = sc.agent.mu_lo;
        opt.mu_hi = sc.agent.mu_hi;
        opt.max_samples = 200000;
        const StationaryRoot root = find_stationary_multiplier(
            sc.valuation, sc.competing, sc.time_saving, sc.agent.gain_share, opt, stream);
        if (root.status == RootStatus::kFound) {
          in.stationary_multiplier = root.multiplier;
          const double lo = std::max(sc.agent.mu_lo, 0.5 * root.multiplier);
          const double hi = std::min(sc.agent.mu_hi, 2.0 * root.multiplier);
          if (lo < root.multiplier && root.multiplier < hi)
            in.monotonicity = estimate_monotonicity(sc.valuation, sc.competing, sc.time_saving,
                                                    sc.agent.gain_share, root.multiplier, lo, hi,
                                                    21, 50000, stream)
                                  .lambda;
        }
      }
    } else {
      const PopulationConfig pc = build_population(s.config, T);
      in.setting = pc.mech.n_auctions > 1 ? Setting::kParallel : Setting::kSimultaneous;
      const AgentParams& a = pc.agents.front();
      in.mu_lo = a.mu_lo;
      in.mu_hi = a.mu_hi;
      std::vector<double> mu;
      for (const auto& p : pc.agents) mu.push_back(p.initial_multiplier);
      in.initial_multiplier = hyperplane_multiplier(mu);
      in.initial_karma = a.initial_karma;
      in.eps = step_at(a.step, 1, T);
      in.n_agents = pc.mech.n_agents;
      in.capacity = pc.mech.capacity;
      if (simulate) {
        constexpr int kProbeReps = 10;
        double ratio = 0.0;
        for (int r = 0; r < kProbeReps; ++r) {
          const Trace tr = run_population_config(pc, StreamFactory(horizon_seed(spec.seed, T), r));
          for (const auto& ag : tr.agents) ratio += double(ag.hitting.mu_lo) / T;
        }
        in.hitting_ratio = ratio / (kProbeReps * pc.mech.n_agents);
      }
    }
    reports.push_back({s.label, check_assumptions(in)});
  }
  return reports;
}

std::vector<SlopeRow> fit_slopes_from_csv(const std::filesystem::path& results_csv) {
  std::ifstream in(results_csv);
  if (!in) fail("cannot open '" + results_csv.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "grid_id,T,param_hash,stat_name,mean,ci_lo,ci_hi,n_reps")
    fail("'" + results_csv.string() + "' does not have the results.csv header");

  std::map<int, std::string> series_of;
  const auto manifest_path = results_csv.parent_path() / "manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    std::ifstream m(manifest_path);
    const Json manifest = Json::parse(m);
    for (const auto& g : manifest.at("grid"))
      series_of[g.at("grid_id").get<int>()] = g.at("series").get<std::string>();
  }

  // (series, stat) -> T -> mean
  std::map<std::pair<std::string, std::string>, std::map<int, double>> points;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 8) fail("malformed row at line " + std::to_string(line_no));
    int id = 0, T = 0;
    double mean = 0.0;
    try {
      id = std::stoi(cells[0]);
      T = std::stoi(cells[1]);
      mean = std::stod(cells[4]);
    } catch (const std::logic_error&) {
      fail("malformed number at line " + std::to_string(line_no));
    }
    const auto it = series_of.find(id);
    const std::string series = it != series_of.end() ? it->second : "all";
    auto& pts = points[{series, cells[3]}];
    if (pts.count(T)) fail("duplicate T for one series; a manifest.json is needed");
    pts[T] = mean;
  }

  std::vector<SlopeRow> out;
  for (const auto& [key, pts] : points) {
    if (pts.size() < 3) continue;
    std::vector<double> xs, ys;
    for (const auto& [T, y] : pts) {
      xs.push_back(T);
      ys.push_back(y);
    }
    if (!std::all_of(ys.begin(), ys.end(), [](double y) { return y > 0.0; })) continue;
    out.push_back({key.first, key.second, fit_loglog_slope(xs, ys)});
  }
  return out;
}

}  // namespace karma
