#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "karma/rng.hpp"

namespace karma {

// Raised for malformed configuration: bad distribution parameters, dimension
// mismatches, violated mechanism invariants.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MechanismParams {
  int n_agents = 2;
  int capacity = 1;  // winners per auction
  int n_auctions = 1;
  double time_saving = 1.0;  // utility fraction saved per won round
  int horizon = 1;

  // Throws ConfigError unless 1 <= capacity <= n_agents - 1, n_auctions >= 1,
  // horizon >= 1 and time_saving >= 0.
  void validate() const;

  double gain_share() const { return static_cast<double>(capacity) / n_agents; }
};

// ---------------------------------------------------------------------------
// Valuation distributions. Parameters are checked when the value is built;
// sampling never fails.

struct ContinuousUniform {
  ContinuousUniform(double lo, double hi);
  double lo;
  double hi;
};

// Uniform on {1, ..., levels}.
struct DiscreteUniform {
  explicit DiscreteUniform(int levels);
  int levels;
};

// Number of Bernoulli(p) trials up to and including the first success;
// support {1, 2, ...}, unnormalized.
struct Geometric {
  explicit Geometric(double p);
  double p;
};

struct Constant {
  explicit Constant(double value);
  double value;
};

using ValuationModel = std::variant<ContinuousUniform, DiscreteUniform, Geometric, Constant>;

double sample_valuation(const ValuationModel& model, RngStream& stream);
double distribution_mean(const ValuationModel& model);
double distribution_cdf(const ValuationModel& model, double x);
// [min, max] of the support; max is +inf for Geometric.
std::pair<double, double> distribution_support(const ValuationModel& model);
std::string describe(const ValuationModel& model);

// ---------------------------------------------------------------------------
// Competing bids (d^gamma, d^{gamma+1}) faced by one agent.

struct CompetingPair {
  double hi = 0.0;  // gamma-th highest competing bid
  double lo = 0.0;  // (gamma+1)-th highest competing bid, lo <= hi
};

// When the agent cannot set the price both components equal one draw from
// `marginal`. Otherwise two i.i.d. draws are sorted into (hi, lo).
struct IidPair {
  ValuationModel marginal;
  bool price_setter_allowed = false;
};

struct EmpiricalPairs {
  explicit EmpiricalPairs(std::vector<CompetingPair> pairs);
  std::vector<CompetingPair> pairs;
};

using CompetingBidModel = std::variant<IidPair, EmpiricalPairs>;

CompetingPair sample_competing(const CompetingBidModel& model, RngStream& stream);
std::pair<double, double> competing_support(const CompetingBidModel& model);
double competing_mean_hi(const CompetingBidModel& model);

// ---------------------------------------------------------------------------
// Step sizes.

struct FixedStep {
  explicit FixedStep(double eps);
  double eps;
};

// eps_t = coef * t^exponent, t = 1, 2, ...
struct PowerLawStep {
  PowerLawStep(double coef, double exponent);
  double coef;
  double exponent;
};

// eps = coef * T^exponent, constant within an episode of horizon T.
struct HorizonPowerStep {
  HorizonPowerStep(double coef, double exponent);
  double coef;
  double exponent;
};

using StepSchedule = std::variant<FixedStep, PowerLawStep, HorizonPowerStep>;

double step_at(const StepSchedule& schedule, int round, int horizon);

struct AgentParams {
  double initial_karma = 0.0;
  double initial_multiplier = 1.0;
  double mu_lo = 0.1;
  double mu_hi = 1000.0;
  StepSchedule step = FixedStep(0.01);
  double target_rate = 0.0;  // adaptive pacing only; k1 / T
  double gain_share = 0.0;   // stationary setting only; gamma / N

  void validate() const;
};

// ---------------------------------------------------------------------------
// Parallel auction matching.

struct UniformMatching {};

struct FixedMatching {
  std::vector<int> assignment;  // agent -> auction, 0-based
};

struct CustomMatching {
  // rows[i][m] = probability that agent i joins auction m
  std::vector<std::vector<double>> rows;
};

using MatchingModel = std::variant<UniformMatching, FixedMatching, CustomMatching>;

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// pi(i, m); throws ConfigError on dimension mismatch or rows not summing to 1.
Matrix participation_probabilities(const MatchingModel& model, int n_agents, int n_auctions);

// a(i, j) = sum_m pi(i, m) pi(j, m) for i != j; the diagonal is left at 0.
Matrix matching_probabilities(const MatchingModel& model, int n_agents, int n_auctions);

int draw_auction(const MatchingModel& model, int agent, int n_auctions, RngStream& stream);

}  // namespace karma
