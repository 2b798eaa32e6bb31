#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "karma/core.hpp"
#include "karma/hindsight.hpp"
#include "karma/rng.hpp"
#include "karma/sim.hpp"
#include "karma/strategies.hpp"

namespace karma {

// Monte Carlo estimates of the expected per-round dual objective, expenditure,
// gain and loss for a truthful-scaled bidder b = Delta v / mu.
struct DualEstimates {
  double psi0 = 0.0;
  double expenditure = 0.0;
  double gain = 0.0;
  double loss = 0.0;  // expenditure - gain
  double psi0_se = 0.0;
  double expenditure_se = 0.0;
  double gain_se = 0.0;
  double loss_se = 0.0;  // from the paired per-sample differences
};

DualEstimates estimate_dual_point(double multiplier, const ValuationModel& valuation,
                                  const CompetingBidModel& competing, double time_saving,
                                  double gain_share, int n_samples, RngStream& stream);

enum class RootStatus {
  kFound,
  kNoSignChange,  // loss keeps one sign on the bracket; multiplier is the nearer end
  kDegenerate,    // loss vanishes at both ends (e.g. all competing bids zero)
};

struct StationaryRoot {
  double multiplier = 0.0;
  RootStatus status = RootStatus::kFound;
  double loss = 0.0;  // estimated loss at the returned multiplier
  int samples = 0;    // size of the final common sample
};

struct RootSearchOptions {
  double mu_lo = 0.1;
  double mu_hi = 1000.0;
  double tolerance = 1e-4;
  int initial_samples = 20000;
  int max_samples = 2000000;
};

// Root of the expected loss by bisection on one fixed sample per stage. The
// sample grows tenfold per stage and the bracket narrows around the previous
// root.
StationaryRoot find_stationary_multiplier(const ValuationModel& valuation,
                                          const CompetingBidModel& competing, double time_saving,
                                          double gain_share, const RootSearchOptions& options,
                                          RngStream& stream);

// Empirical strong-monotonicity constant of the loss around a root mu*:
// the smallest -L(mu) / (mu - mu*) over an even grid on [lo, hi], with L
// evaluated on one common sample.
struct MonotonicityEstimate {
  double lambda = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int grid_points = 0;
  int samples = 0;
};

MonotonicityEstimate estimate_monotonicity(const ValuationModel& valuation,
                                           const CompetingBidModel& competing,
                                           double time_saving, double gain_share,
                                           double root, double lo, double hi, int grid_points,
                                           int n_samples, RngStream& stream);

// By symmetry every agent of a symmetric all-K population settles at the mean
// of the initial multipliers, which the dynamics conserve.
double hyperplane_multiplier(std::span<const double> initial_multipliers);

// Builds the hindsight problem on one recorded agent's sample path.
HindsightInstance hindsight_instance(const Trace& trace, int agent, double time_saving,
                                     double budget, double gain_share);

// (realized cost - fractional hindsight cost) / T.
double regret_vs_hindsight(const Trace& trace, int agent, const HindsightInstance& inst);

struct ConvergenceSeries {
  std::vector<double> distance;  // ||mu_t - reference||^2, t = 1..T
  double mean = 0.0;
};

// Needs a trace recorded with record_multipliers.
ConvergenceSeries convergence_distance(const Trace& trace, std::span<const double> reference);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double std_error = 0.0;
  int n_points = 0;
};

// OLS of log y on log x. Needs at least three points and y > 0.
SlopeFit fit_loglog_slope(std::span<const double> x, std::span<const double> y);

struct Summary {
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int n = 0;
};

// Mean with a two-sided 95% Student-t interval; a single value gets a
// zero-width interval.
Summary summarize(std::span<const double> values);

// ---------------------------------------------------------------------------
// Parameter-design diagnostics.

enum class CheckStatus { kPass, kFail, kNotCheckable };

const char* to_string(CheckStatus status);

struct AssumptionItem {
  std::string id;
  std::string description;
  CheckStatus status = CheckStatus::kNotCheckable;
  std::string detail;
};

enum class Setting { kStationary, kSimultaneous, kParallel };

struct AssumptionInputs {
  Setting setting = Setting::kStationary;
  LearnerKind learner = LearnerKind::kKarmaPacing;
  double time_saving = 1.0;
  double mu_lo = 0.1;
  double mu_hi = 1000.0;
  double initial_multiplier = 1.0;  // mean over agents in population settings
  double eps = 0.01;                // step size at the horizon of interest
  double initial_karma = 0.0;
  double gain_share = 0.0;  // stationary setting; populations use capacity / n_agents
  int horizon = 1;
  int n_agents = 2;
  int capacity = 1;
  ValuationModel valuation = ContinuousUniform(0.0, 1.0);
  std::optional<CompetingBidModel> competing;  // stationary setting only
  std::optional<double> karma_exponent;        // k_1(T) ~ T^y; nullopt if fixed
  std::optional<double> step_exponent;         // eps(T) ~ T^x; nullopt if fixed
  std::optional<double> stationary_multiplier;
  std::optional<double> monotonicity;  // empirical lambda, stationary setting
  // Mean over agents and replications of the lower-bound hitting time / T at
  // the largest horizon, when simulations are available.
  std::optional<double> hitting_ratio;
};

std::vector<AssumptionItem> check_assumptions(const AssumptionInputs& in);

}  // namespace karma
