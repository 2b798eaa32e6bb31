#include "karma/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "karma/auction.hpp"

namespace karma {

namespace {

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  void add(double x) {
    sum += x;
    sum_sq += x * x;
  }
  double mean(double n) const { return sum / n; }
  double std_error(double n) const {
    const double m = sum / n;
    const double var = std::max(0.0, (sum_sq - n * m * m) / (n - 1.0));
    return std::sqrt(var / n);
  }
};

struct Draw {
  double v;
  CompetingPair d;
};

double sample_loss(const std::vector<Draw>& draws, double mu, double delta, double gain_share) {
  double s = 0.0;
  for (const auto& w : draws) {
    const double b = delta * w.v / mu;
    const double z = b > w.d.hi ? w.d.hi : 0.0;
    s += z - stationary_gain(b, w.d, gain_share);
  }
  return s / static_cast<double>(draws.size());
}

}  // namespace

DualEstimates estimate_dual_point(double multiplier, const ValuationModel& valuation,
                                  const CompetingBidModel& competing, double time_saving,
                                  double gain_share, int n_samples, RngStream& stream) {
  if (!(multiplier > 0.0)) throw ConfigError("estimate_dual_point: multiplier must be positive");
  if (n_samples < 2) throw ConfigError("estimate_dual_point: need at least two samples");

  Moments psi, exp, gain, loss;
  for (int k = 0; k < n_samples; ++k) {
    const double v = sample_valuation(valuation, stream);
    const CompetingPair d = sample_competing(competing, stream);
    const double b = time_saving * v / multiplier;
    const double z = b > d.hi ? d.hi : 0.0;
    const double g = stationary_gain(b, d, gain_share);
    psi.add(v - multiplier * g - std::max(time_saving * v - multiplier * d.hi, 0.0));
    exp.add(z);
    gain.add(g);
    loss.add(z - g);
  }
  const double n = n_samples;
  DualEstimates e;
  e.psi0 = psi.mean(n);
  e.expenditure = exp.mean(n);
  e.gain = gain.mean(n);
  e.loss = e.expenditure - e.gain;
  e.psi0_se = psi.std_error(n);
  e.expenditure_se = exp.std_error(n);
  e.gain_se = gain.std_error(n);
  e.loss_se = loss.std_error(n);
  return e;
}

StationaryRoot find_stationary_multiplier(const ValuationModel& valuation,
                                          const CompetingBidModel& competing, double time_saving,
                                          double gain_share, const RootSearchOptions& options,
                                          RngStream& stream) {
  if (!(options.mu_lo > 0.0) || !(options.mu_hi > options.mu_lo))
    throw ConfigError("find_stationary_multiplier: need 0 < mu_lo < mu_hi");
  if (!(options.tolerance > 0.0)) throw ConfigError("find_stationary_multiplier: tolerance");
  if (options.initial_samples < 2 || options.max_samples < options.initial_samples)
    throw ConfigError("find_stationary_multiplier: bad sample sizes");

  std::vector<Draw> draws;
  StationaryRoot root;
  double lo = options.mu_lo;
  double hi = options.mu_hi;

  for (int n = options.initial_samples;; n = std::min(options.max_samples, n * 10)) {
    while (static_cast<int>(draws.size()) < n) {
      const double v = sample_valuation(valuation, stream);
      draws.push_back({v, sample_competing(competing, stream)});
    }
    root.samples = n;
    const auto loss = [&](double mu) { return sample_loss(draws, mu, time_saving, gain_share); };

    double l_lo = loss(lo);
    double l_hi = loss(hi);
    if (!(l_lo > 0.0 && l_hi < 0.0) && (lo != options.mu_lo || hi != options.mu_hi)) {
      lo = options.mu_lo;
      hi = options.mu_hi;
      l_lo = loss(lo);
      l_hi = loss(hi);
    }
    const double scale = std::max(std::abs(l_lo), std::abs(l_hi));
    if (scale <= 1e-15) {
      root = {options.mu_lo, RootStatus::kDegenerate, 0.0, n};
      return root;
    }
    if (l_lo <= 0.0) {
      root = {options.mu_lo, RootStatus::kNoSignChange, l_lo, n};
      return root;
    }
    if (l_hi >= 0.0) {
      root = {options.mu_hi, RootStatus::kNoSignChange, l_hi, n};
      return root;
    }
    while (hi - lo > options.tolerance) {
      const double mid = 0.5 * (lo + hi);
      if (loss(mid) > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    const double mu = 0.5 * (lo + hi);
    root = {mu, RootStatus::kFound, loss(mu), n};
    if (n >= options.max_samples) return root;

    const double width = std::max(10.0 * options.tolerance, 0.05 * mu);
    lo = std::max(options.mu_lo, mu - width);
    hi = std::min(options.mu_hi, mu + width);
  }
}

MonotonicityEstimate estimate_monotonicity(const ValuationModel& valuation,
                                           const CompetingBidModel& competing,
                                           double time_saving, double gain_share,
                                           double root, double lo, double hi, int grid_points,
                                           int n_samples, RngStream& stream) {
  if (!(lo > 0.0) || !(lo < root) || !(root < hi))
    throw ConfigError("estimate_monotonicity: need 0 < lo < root < hi");
  if (grid_points < 2 || n_samples < 1)
    throw ConfigError("estimate_monotonicity: need two grid points and one sample");
  std::vector<Draw> draws(static_cast<std::size_t>(n_samples));
  for (auto& w : draws) {
    w.v = sample_valuation(valuation, stream);
    w.d = sample_competing(competing, stream);
  }
  const double at_root = sample_loss(draws, root, time_saving, gain_share);
  double lambda = std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid_points; ++k) {
    const double mu = lo + (hi - lo) * k / (grid_points - 1);
    if (std::abs(mu - root) < 1e-12 * root) continue;
    const double l = sample_loss(draws, mu, time_saving, gain_share) - at_root;
    lambda = std::min(lambda, -l / (mu - root));
  }
  return {lambda, lo, hi, grid_points, n_samples};
}

double hyperplane_multiplier(std::span<const double> initial_multipliers) {
  if (initial_multipliers.empty()) throw ConfigError("hyperplane_multiplier: empty profile");
  return std::accumulate(initial_multipliers.begin(), initial_multipliers.end(), 0.0) /
         static_cast<double>(initial_multipliers.size());
}

HindsightInstance hindsight_instance(const Trace& trace, int agent, double time_saving,
                                     double budget, double gain_share) {
  const auto& rounds = trace.agent_rounds(agent);
  HindsightInstance inst;
  inst.valuations.reserve(rounds.size());
  inst.competing.reserve(rounds.size());
  for (const auto& r : rounds) {
    inst.valuations.push_back(r.valuation);
    inst.competing.push_back(r.competing_hi);
  }
  inst.time_saving = time_saving;
  inst.budget = budget;
  inst.gain_share = gain_share;
  return inst;
}

double regret_vs_hindsight(const Trace& trace, int agent, const HindsightInstance& inst) {
  if (inst.horizon() != trace.horizon)
    throw ConfigError("regret_vs_hindsight: instance and trace horizons differ");
  if (agent < 0 || agent >= static_cast<int>(trace.agents.size()))
    throw ConfigError("regret_vs_hindsight: agent out of range");
  const double benchmark = solve_fractional(inst).cost;
  return (trace.agents[agent].total_cost - benchmark) / static_cast<double>(trace.horizon);
}

ConvergenceSeries convergence_distance(const Trace& trace, std::span<const double> reference) {
  const auto n = static_cast<std::size_t>(trace.n_agents);
  if (reference.size() != n) throw ConfigError("convergence_distance: reference length");
  if (trace.multiplier_history.size() < n * static_cast<std::size_t>(trace.horizon))
    throw ConfigError("convergence_distance: trace has no multiplier history");
  ConvergenceSeries out;
  out.distance.resize(trace.horizon);
  for (int t = 0; t < trace.horizon; ++t) {
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = trace.multiplier_history[t * n + i] - reference[i];
      d += e * e;
    }
    out.distance[t] = d;
  }
  out.mean = std::accumulate(out.distance.begin(), out.distance.end(), 0.0) / trace.horizon;
  return out;
}

SlopeFit fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("fit_loglog_slope: length mismatch");
  if (x.size() < 3) throw ConfigError("fit_loglog_slope: need at least three points");
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw ConfigError("fit_loglog_slope: values must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw ConfigError("fit_loglog_slope: x values must not all coincide");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.n_points = static_cast<int>(n);
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - fit.intercept - fit.slope * lx[i];
    rss += r * r;
  }
  fit.std_error = n > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
  return fit;
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw ConfigError("summarize: no values");
  Summary s;
  s.n = static_cast<int>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / s.n;
  if (s.n == 1) {
    s.ci_lo = s.ci_hi = s.mean;
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  const double se = std::sqrt(ss / (s.n - 1.0) / s.n);
  const boost::math::students_t dist(s.n - 1.0);
  const double q = boost::math::quantile(dist, 0.975);
  s.ci_lo = s.mean - q * se;
  s.ci_hi = s.mean + q * se;
  return s;
}

const char* to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::kPass: return "pass";
    case CheckStatus::kFail: return "fail";
    case CheckStatus::kNotCheckable: return "not-checkable";
  }
  return "?";
}

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

AssumptionItem item(std::string id, std::string description, bool ok, std::string detail) {
  return {std::move(id), std::move(description), ok ? CheckStatus::kPass : CheckStatus::kFail,
          std::move(detail)};
}

AssumptionItem not_checkable(std::string id, std::string description, std::string detail) {
  return {std::move(id), std::move(description), CheckStatus::kNotCheckable, std::move(detail)};
}

void asymptotic_items(const AssumptionInputs& in, std::vector<AssumptionItem>& out) {
  if (in.learner != LearnerKind::kKarmaPacing) {
    out.push_back(not_checkable("budget-sublinear", "initial budget grows slower than T",
                                "only required for karma pacing"));
  } else if (in.karma_exponent) {
    out.push_back(item("budget-sublinear", "initial budget grows slower than T",
                       *in.karma_exponent < 1.0, "exponent " + fmt(*in.karma_exponent)));
  } else {
    out.push_back(item("budget-sublinear", "initial budget grows slower than T", true,
                       "budget does not scale with T"));
  }
  if (in.step_exponent) {
    const double x = *in.step_exponent;
    out.push_back(item("step-vanishing", "eps -> 0 and eps T -> infinity", x < 0.0 && x > -1.0,
                       "exponent " + fmt(x)));
  } else {
    out.push_back(item("step-vanishing", "eps -> 0 and eps T -> infinity", false,
                       "step size does not shrink with T"));
  }
}

void interior_item(const AssumptionInputs& in, double mu_star, std::vector<AssumptionItem>& out) {
  out.push_back(item("multiplier-interior", "mu_lo < stationary multiplier < mu_hi",
                     in.mu_lo < mu_star && mu_star < in.mu_hi, "stationary multiplier " + fmt(mu_star)));
}

void stationary_items(const AssumptionInputs& in, std::vector<AssumptionItem>& out) {
  const double delta = in.time_saving;
  if (in.stationary_multiplier)
    interior_item(in, *in.stationary_multiplier, out);
  else
    out.push_back(not_checkable("multiplier-interior", "mu_lo < stationary multiplier < mu_hi",
                                "no stationary multiplier estimate supplied"));

  if (!in.competing) {
    out.push_back(not_checkable("competing-support", "competing bids within [0, Delta / mu_lo]",
                                "no competing-bid model"));
    out.push_back(not_checkable("target-rate", "0 < rho < (1 - gamma/N) E[d]",
                                "no competing-bid model"));
    return;
  }
  const auto [d_lo, d_hi] = competing_support(*in.competing);
  out.push_back(item("competing-support", "competing bids within [0, Delta / mu_lo]",
                     d_hi <= delta / in.mu_lo, "max competing bid " + fmt(d_hi)));
  const double rho = in.initial_karma / in.horizon;
  const double cap = (1.0 - in.gain_share) * competing_mean_hi(*in.competing);
  out.push_back(item("target-rate", "0 < rho < (1 - gamma/N) E[d]", rho > 0.0 && rho < cap,
                     "rho " + fmt(rho) + ", bound " + fmt(cap)));
  if (in.monotonicity && *in.monotonicity > 0.0) {
    const double cap = 1.0 / (2.0 * *in.monotonicity);
    out.push_back(item("step-vs-monotonicity", "eps <= 1 / (2 lambda)", in.eps <= cap,
                       "eps " + fmt(in.eps) + ", empirical lambda " + fmt(*in.monotonicity)));
  } else {
    out.push_back(not_checkable("step-vs-monotonicity", "eps <= 1 / (2 lambda)",
                                "strong monotonicity constant is unknown"));
  }

  const double v_lo = distribution_support(in.valuation).first;
  const double inner = d_hi > 0.0 ? delta * v_lo / (d_hi * d_hi) : 0.0;
  const double outer = d_lo > 0.0 ? delta / d_lo : std::numeric_limits<double>::infinity();
  const bool bounds_ok = v_lo > 0.0 && d_lo > 0.0 && in.mu_lo < inner && in.mu_hi > outer;
  out.push_back(item("hitting-bounds", "mu_lo < Delta v_min / d_max^2 and mu_hi > Delta / d_min",
                     bounds_ok,
                     "v_min " + fmt(v_lo) + ", d_min " + fmt(d_lo) + ", d_max " + fmt(d_hi)));
  const double step_cap =
      bounds_ok ? std::min(inner - in.mu_lo, (in.mu_hi - outer) / d_hi) : 0.0;
  out.push_back(item("hitting-step", "eps below the bound-margin limit",
                     bounds_ok && in.eps < step_cap,
                     "eps " + fmt(in.eps) + ", limit " + fmt(step_cap)));
  const double need = (in.mu_hi - in.initial_multiplier) / in.eps + delta / in.mu_lo;
  out.push_back(item("hitting-budget", "k_1 > (mu_hi - mu_1) / eps + Delta / mu_lo",
                     in.initial_karma > need,
                     "k_1 " + fmt(in.initial_karma) + ", needed " + fmt(need)));
}

void population_items(const AssumptionInputs& in, std::vector<AssumptionItem>& out) {
  const double delta = in.time_saving;
  const double mu_m = in.initial_multiplier;
  const double share = static_cast<double>(in.capacity) / in.n_agents;
  interior_item(in, in.stationary_multiplier.value_or(mu_m), out);
  out.push_back(not_checkable("step-vs-monotonicity", "eps <= 1 / (2 lambda)",
                              "strong monotonicity constant is unknown"));

  const double v = distribution_support(in.valuation).first;
  const bool lo_ok = v > 0.0 && in.mu_lo < 0.5 * v * mu_m;
  const bool hi_ok = v > 0.0 && in.mu_hi >= mu_m * (1.0 + 2.0 / v / (1.0 - share) - 0.5 * v);
  out.push_back(item("population-bounds", "multiplier bounds wide enough around the mean",
                     lo_ok && hi_ok, "v_min " + fmt(v) + ", mean multiplier " + fmt(mu_m)));

  double limit = 0.0;
  if (v > 0.0) {
    const double a = (1.0 - 0.5 * v) / share;
    const double b = 0.5 * v / (1.0 + (v + 1.0) * share);
    const double c = 1.0 / v / (1.0 - share * share);
    limit = mu_m * in.mu_lo / delta * std::min({a, b, c});
  }
  out.push_back(item("population-step", "eps below the hitting-time step limit",
                     in.eps > 0.0 && in.eps < limit,
                     "eps " + fmt(in.eps) + ", limit " + fmt(limit)));

  if (in.hitting_ratio) {
    out.push_back(item("empirical-hitting-time", "mean lower hitting time / T close to 1",
                       *in.hitting_ratio >= 0.99, "observed ratio " + fmt(*in.hitting_ratio)));
  } else {
    out.push_back(not_checkable("empirical-hitting-time", "mean lower hitting time / T close to 1",
                                "needs simulation output"));
  }
  if (in.setting == Setting::kParallel) {
    out.push_back(not_checkable("matching-vanishing", "max ||a_i|| -> 0 as N, M grow",
                                "asymptotic in N and M"));
  }
}

}  // namespace

std::vector<AssumptionItem> check_assumptions(const AssumptionInputs& in) {
  std::vector<AssumptionItem> out;
  asymptotic_items(in, out);
  if (in.setting == Setting::kStationary)
    stationary_items(in, out);
  else
    population_items(in, out);
  return out;
}

}  // namespace karma
