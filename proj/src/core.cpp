#include "karma/core.hpp"

#include "karma/detail/overloaded.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace karma {

using detail::Overloaded;

void MechanismParams::validate() const {
  if (n_agents < 2) throw ConfigError("mechanism: need at least two agents");
  if (capacity < 1 || capacity > n_agents - 1)
    throw ConfigError("mechanism: capacity must lie in [1, n_agents - 1]");
  if (n_auctions < 1) throw ConfigError("mechanism: n_auctions must be >= 1");
  if (horizon < 1) throw ConfigError("mechanism: horizon must be >= 1");
  if (!(time_saving >= 0.0)) throw ConfigError("mechanism: time_saving must be >= 0");
}

ContinuousUniform::ContinuousUniform(double lo_, double hi_) : lo(lo_), hi(hi_) {
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw ConfigError("uniform valuation needs finite lo < hi");
  if (lo < 0.0) throw ConfigError("uniform valuation must be nonnegative");
}

DiscreteUniform::DiscreteUniform(int levels_) : levels(levels_) {
  if (levels < 1) throw ConfigError("discrete uniform needs at least one level");
}

Geometric::Geometric(double p_) : p(p_) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("geometric parameter must lie in (0, 1)");
}

Constant::Constant(double value_) : value(value_) {
  if (!(value >= 0.0) || !std::isfinite(value))
    throw ConfigError("constant valuation must be finite and nonnegative");
}

double sample_valuation(const ValuationModel& model, RngStream& stream) {
  return std::visit(
      Overloaded{
          [&](const ContinuousUniform& m) { return stream.uniform(m.lo, m.hi); },
          [&](const DiscreteUniform& m) {
            const auto k = static_cast<int>(stream.uniform() * m.levels);
            return static_cast<double>(std::min(k, m.levels - 1) + 1);
          },
          [&](const Geometric& m) {
            // inversion: smallest k with 1 - (1-p)^k >= u
            const double u = stream.uniform();
            const double k = std::ceil(std::log1p(-u) / std::log1p(-m.p));
            return std::max(1.0, k);
          },
          [](const Constant& m) { return m.value; },
      },
      model);
}

double distribution_mean(const ValuationModel& model) {
  return std::visit(Overloaded{
                        [](const ContinuousUniform& m) { return 0.5 * (m.lo + m.hi); },
                        [](const DiscreteUniform& m) { return 0.5 * (m.levels + 1); },
                        [](const Geometric& m) { return 1.0 / m.p; },
                        [](const Constant& m) { return m.value; },
                    },
                    model);
}

double distribution_cdf(const ValuationModel& model, double x) {
  return std::visit(
      Overloaded{
          [&](const ContinuousUniform& m) {
            return std::clamp((x - m.lo) / (m.hi - m.lo), 0.0, 1.0);
          },
          [&](const DiscreteUniform& m) {
            return std::clamp(std::floor(x) / m.levels, 0.0, 1.0);
          },
          [&](const Geometric& m) {
            if (x < 1.0) return 0.0;
            return 1.0 - std::pow(1.0 - m.p, std::floor(x));
          },
          [&](const Constant& m) { return x >= m.value ? 1.0 : 0.0; },
      },
      model);
}

std::pair<double, double> distribution_support(const ValuationModel& model) {
  return std::visit(
      Overloaded{
          [](const ContinuousUniform& m) { return std::pair{m.lo, m.hi}; },
          [](const DiscreteUniform& m) { return std::pair{1.0, double(m.levels)}; },
          [](const Geometric&) {
            return std::pair{1.0, std::numeric_limits<double>::infinity()};
          },
          [](const Constant& m) { return std::pair{m.value, m.value}; },
      },
      model);
}

std::string describe(const ValuationModel& model) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const ContinuousUniform& m) { os << "uniform(" << m.lo << "," << m.hi << ")"; },
                 [&](const DiscreteUniform& m) { os << "discrete(1.." << m.levels << ")"; },
                 [&](const Geometric& m) { os << "geometric(" << m.p << ")"; },
                 [&](const Constant& m) { os << "constant(" << m.value << ")"; },
             },
             model);
  return os.str();
}

EmpiricalPairs::EmpiricalPairs(std::vector<CompetingPair> pairs_) : pairs(std::move(pairs_)) {
  if (pairs.empty()) throw ConfigError("empirical competing bids: no pairs");
  for (const auto& p : pairs) {
    if (!(p.lo >= 0.0) || !(p.hi >= p.lo))
      throw ConfigError("empirical competing bids: need 0 <= d_lo <= d_hi");
  }
}

CompetingPair sample_competing(const CompetingBidModel& model, RngStream& stream) {
  return std::visit(
      Overloaded{
          [&](const IidPair& m) {
            const double a = sample_valuation(m.marginal, stream);
            if (!m.price_setter_allowed) return CompetingPair{a, a};
            const double b = sample_valuation(m.marginal, stream);
            return CompetingPair{std::max(a, b), std::min(a, b)};
          },
          [&](const EmpiricalPairs& m) {
            auto idx = static_cast<std::size_t>(stream.uniform() * m.pairs.size());
            return m.pairs[std::min(idx, m.pairs.size() - 1)];
          },
      },
      model);
}

std::pair<double, double> competing_support(const CompetingBidModel& model) {
  return std::visit(Overloaded{
                        [](const IidPair& m) { return distribution_support(m.marginal); },
                        [](const EmpiricalPairs& m) {
                          double lo = std::numeric_limits<double>::infinity();
                          double hi = 0.0;
                          for (const auto& p : m.pairs) {
                            lo = std::min(lo, p.lo);
                            hi = std::max(hi, p.hi);
                          }
                          return std::pair{lo, hi};
                        },
                    },
                    model);
}

double competing_mean_hi(const CompetingBidModel& model) {
  return std::visit(
      Overloaded{
          [](const IidPair& m) {
            if (!m.price_setter_allowed) return distribution_mean(m.marginal);
            // E[max(X, Y)] for two i.i.d. draws.
            if (const auto* u = std::get_if<ContinuousUniform>(&m.marginal))
              return u->lo + (u->hi - u->lo) * 2.0 / 3.0;
            if (const auto* c = std::get_if<Constant>(&m.marginal)) return c->value;
            // integer support: sum over k >= 1 of P(max >= k)
            double s = 0.0;
            for (int k = 1; k < 10'000'000; ++k) {
              const double f = distribution_cdf(m.marginal, k - 1.0);
              const double term = 1.0 - f * f;
              s += term;
              if (term < 1e-16) break;
            }
            return s;
          },
          [](const EmpiricalPairs& m) {
            double s = 0.0;
            for (const auto& p : m.pairs) s += p.hi;
            return s / static_cast<double>(m.pairs.size());
          },
      },
      model);
}

FixedStep::FixedStep(double eps_) : eps(eps_) {
  if (!(eps > 0.0)) throw ConfigError("step size must be positive");
}

PowerLawStep::PowerLawStep(double coef_, double exponent_) : coef(coef_), exponent(exponent_) {
  if (!(coef > 0.0)) throw ConfigError("step coefficient must be positive");
}

HorizonPowerStep::HorizonPowerStep(double coef_, double exponent_)
    : coef(coef_), exponent(exponent_) {
  if (!(coef > 0.0)) throw ConfigError("step coefficient must be positive");
}

double step_at(const StepSchedule& schedule, int round, int horizon) {
  return std::visit(
      Overloaded{
          [](const FixedStep& s) { return s.eps; },
          [&](const PowerLawStep& s) { return s.coef * std::pow(double(round), s.exponent); },
          [&](const HorizonPowerStep& s) { return s.coef * std::pow(double(horizon), s.exponent); },
      },
      schedule);
}

void AgentParams::validate() const {
  if (!(initial_karma >= 0.0)) throw ConfigError("agent: initial karma must be >= 0");
  if (!(mu_lo > 0.0) || !(mu_hi > mu_lo))
    throw ConfigError("agent: need 0 < mu_lo < mu_hi");
  if (!(initial_multiplier >= mu_lo && initial_multiplier <= mu_hi))
    throw ConfigError("agent: initial multiplier must lie in [mu_lo, mu_hi]");
  if (!(target_rate >= 0.0)) throw ConfigError("agent: target rate must be >= 0");
  if (!(gain_share >= 0.0 && gain_share <= 1.0))
    throw ConfigError("agent: gain share must lie in [0, 1]");
}

Matrix participation_probabilities(const MatchingModel& model, int n_agents, int n_auctions) {
  if (n_agents < 1 || n_auctions < 1) throw ConfigError("matching: empty dimensions");
  Matrix pi(n_agents, n_auctions);
  std::visit(
      Overloaded{
          [&](const UniformMatching&) {
            std::fill(pi.data.begin(), pi.data.end(), 1.0 / n_auctions);
          },
          [&](const FixedMatching& m) {
            if (static_cast<int>(m.assignment.size()) != n_agents)
              throw ConfigError("matching: assignment length differs from n_agents");
            for (int i = 0; i < n_agents; ++i) {
              const int a = m.assignment[i];
              if (a < 0 || a >= n_auctions) throw ConfigError("matching: auction index out of range");
              pi(i, a) = 1.0;
            }
          },
          [&](const CustomMatching& m) {
            if (static_cast<int>(m.rows.size()) != n_agents)
              throw ConfigError("matching: probability rows differ from n_agents");
            for (int i = 0; i < n_agents; ++i) {
              if (static_cast<int>(m.rows[i].size()) != n_auctions)
                throw ConfigError("matching: probability row length differs from n_auctions");
              double s = 0.0;
              for (int a = 0; a < n_auctions; ++a) {
                if (m.rows[i][a] < 0.0) throw ConfigError("matching: negative probability");
                pi(i, a) = m.rows[i][a];
                s += m.rows[i][a];
              }
              if (std::abs(s - 1.0) > 1e-12) throw ConfigError("matching: row does not sum to 1");
            }
          },
      },
      model);
  return pi;
}

Matrix matching_probabilities(const MatchingModel& model, int n_agents, int n_auctions) {
  const Matrix pi = participation_probabilities(model, n_agents, n_auctions);
  Matrix a(n_agents, n_agents);
  for (int i = 0; i < n_agents; ++i) {
    for (int j = i + 1; j < n_agents; ++j) {
      double s = 0.0;
      for (int m = 0; m < n_auctions; ++m) s += pi(i, m) * pi(j, m);
      a(i, j) = s;
      a(j, i) = s;
    }
  }
  return a;
}

int draw_auction(const MatchingModel& model, int agent, int n_auctions, RngStream& stream) {
  return std::visit(
      Overloaded{
          [&](const UniformMatching&) {
            const auto m = static_cast<int>(stream.uniform() * n_auctions);
            return std::min(m, n_auctions - 1);
          },
          [&](const FixedMatching& m) { return m.assignment.at(agent); },
          [&](const CustomMatching& m) {
            const auto& row = m.rows.at(agent);
            double u = stream.uniform();
            for (int a = 0; a < n_auctions; ++a) {
              u -= row[a];
              if (u < 0.0) return a;
            }
            return n_auctions - 1;
          },
      },
      model);
}

}  // namespace karma
