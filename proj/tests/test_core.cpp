#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "karma/core.hpp"
#include "karma/rng.hpp"

using namespace karma;

namespace {

// Kolmogorov-Smirnov statistic of a sample against a continuous cdf.
double ks_statistic(std::vector<double> xs, const ValuationModel& model) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = distribution_cdf(model, xs[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

}  // namespace

TEST_CASE("streams are reproducible and separated by every coordinate") {
  const StreamFactory a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  RngStream s1 = a.stream(2, StreamPurpose::kValuation);
  RngStream s2 = b.stream(2, StreamPurpose::kValuation);
  for (int i = 0; i < 100; ++i) CHECK(s1.next() == s2.next());

  std::set<std::uint64_t> firsts;
  firsts.insert(a.stream(2, StreamPurpose::kValuation).next());
  firsts.insert(a.stream(2, StreamPurpose::kCompeting).next());
  firsts.insert(a.stream(3, StreamPurpose::kValuation).next());
  firsts.insert(c.stream(2, StreamPurpose::kValuation).next());
  firsts.insert(d.stream(2, StreamPurpose::kValuation).next());
  CHECK(firsts.size() == 5);
}

TEST_CASE("replication streams are uncorrelated") {
  const int n = 100000;
  RngStream x = StreamFactory(1, 0).stream(0, StreamPurpose::kValuation);
  RngStream y = StreamFactory(1, 1).stream(0, StreamPurpose::kValuation);
  double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    const double u = x.uniform(), v = y.uniform();
    sxy += u * v, sx += u, sy += v, sxx += u * u, syy += v * v;
  }
  const double cov = sxy / n - sx / n * sy / n;
  const double corr = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
  CHECK(std::abs(corr) < 4.0 / std::sqrt(double(n)));
}

TEST_CASE("valuation sampling") {
  RngStream s = StreamFactory(11, 0).stream(0, StreamPurpose::kValuation);

  SUBCASE("constant") { CHECK(sample_valuation(Constant(0.7), s) == 0.7); }

  SUBCASE("uniform support and KS distance") {
    const ValuationModel m = ContinuousUniform(0.0, 1.0);
    std::vector<double> xs(100000);
    for (auto& x : xs) {
      x = sample_valuation(m, s);
      REQUIRE(x >= 0.0);
      REQUIRE(x < 1.0);
    }
    CHECK(ks_statistic(xs, m) < 0.01);
  }

  SUBCASE("shifted uniform KS distance") {
    const ValuationModel m = ContinuousUniform(0.0, 50.0);
    std::vector<double> xs(100000);
    for (auto& x : xs) x = sample_valuation(m, s);
    CHECK(ks_statistic(xs, m) < 0.01);
  }

  SUBCASE("discrete uniform mean over a million draws") {
    const ValuationModel m = DiscreteUniform(10);
    double sum = 0;
    std::vector<int> counts(11, 0);
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
      const double x = sample_valuation(m, s);
      REQUIRE(x == std::floor(x));
      REQUIRE(x >= 1);
      REQUIRE(x <= 10);
      ++counts[int(x)];
      sum += x;
    }
    CHECK(std::abs(sum / n - 5.5) < 0.01);
    for (int k = 1; k <= 10; ++k) CHECK(std::abs(counts[k] / double(n) - 0.1) < 0.003);
  }

  SUBCASE("geometric pmf and mean") {
    const double p = 0.3;
    const ValuationModel m = Geometric(p);
    const int n = 400000;
    double sum = 0;
    int ones = 0, twos = 0;
    for (int i = 0; i < n; ++i) {
      const double x = sample_valuation(m, s);
      REQUIRE(x >= 1);
      sum += x;
      ones += x == 1;
      twos += x == 2;
    }
    CHECK(distribution_mean(m) == doctest::Approx(1 / p));
    CHECK(std::abs(sum / n - 1 / p) < 0.03);
    CHECK(std::abs(ones / double(n) - p) < 0.003);
    CHECK(std::abs(twos / double(n) - p * (1 - p)) < 0.003);
    CHECK(std::isinf(distribution_support(m).second));
  }
}

TEST_CASE("distribution parameters are checked at construction") {
  CHECK_THROWS_AS(ContinuousUniform(1.0, 0.5), ConfigError);
  CHECK_THROWS_AS(ContinuousUniform(-1.0, 0.5), ConfigError);
  CHECK_THROWS_AS(DiscreteUniform(0), ConfigError);
  CHECK_THROWS_AS(Geometric(0.0), ConfigError);
  CHECK_THROWS_AS(Geometric(1.5), ConfigError);
  CHECK_THROWS_AS(Constant(-0.1), ConfigError);
  CHECK_THROWS_AS(EmpiricalPairs({{0.2, 0.5}}), ConfigError);
  CHECK_THROWS_AS(EmpiricalPairs({}), ConfigError);
}

TEST_CASE("competing pairs") {
  RngStream s = StreamFactory(5, 0).stream(0, StreamPurpose::kCompeting);
  SUBCASE("no price setting means equal components") {
    const CompetingBidModel m = IidPair{ContinuousUniform(0, 1), false};
    for (int i = 0; i < 1000; ++i) {
      const auto d = sample_competing(m, s);
      CHECK(d.hi == d.lo);
    }
  }
  SUBCASE("price setting sorts two draws") {
    const CompetingBidModel m = IidPair{ContinuousUniform(0, 1), true};
    double gap = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const auto d = sample_competing(m, s);
      REQUIRE(d.lo <= d.hi);
      gap += d.hi - d.lo;
    }
    // E|U1 - U2| = 1/3
    CHECK(std::abs(gap / n - 1.0 / 3.0) < 0.005);
  }
}

TEST_CASE("mechanism validation") {
  MechanismParams m;
  m.n_agents = 50, m.capacity = 5, m.horizon = 10;
  CHECK_NOTHROW(m.validate());
  CHECK(m.gain_share() == doctest::Approx(0.1));
  m.capacity = 50;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m.capacity = 0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m.capacity = 1, m.n_auctions = 0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m.n_auctions = 1, m.time_saving = -1;
  CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("agent parameters keep the initial multiplier in the box") {
  AgentParams p;
  p.initial_multiplier = 5;
  CHECK_NOTHROW(p.validate());
  p.initial_multiplier = 0.05;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.initial_multiplier = 2000;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("step schedules") {
  CHECK(step_at(FixedStep(0.01), 7, 100) == 0.01);
  CHECK(step_at(PowerLawStep(1.0, -0.5), 4, 100) == doctest::Approx(0.5));
  CHECK(step_at(HorizonPowerStep(20.0, -0.5), 4, 100) == doctest::Approx(2.0));
  CHECK(step_at(HorizonPowerStep(20.0, -0.5), 99, 100) == doctest::Approx(2.0));
}

TEST_CASE("matching probabilities") {
  SUBCASE("uniform, three agents, two auctions") {
    const Matrix a = matching_probabilities(UniformMatching{}, 3, 2);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(a(i, j) == doctest::Approx(i == j ? 0.0 : 0.5));
  }
  SUBCASE("uniform, row norm") {
    const int n = 50, m = 5;
    const Matrix a = matching_probabilities(UniformMatching{}, n, m);
    double sq = 0;
    for (int j = 0; j < n; ++j) sq += a(0, j) * a(0, j);
    CHECK(std::sqrt(n * sq) == doctest::Approx(std::sqrt(double(n * (n - 1))) / m));
  }
  SUBCASE("everyone in the same auction") {
    const Matrix a = matching_probabilities(FixedMatching{{0, 0, 0, 0}}, 4, 2);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        if (i != j) CHECK(a(i, j) == 1.0);
  }
  SUBCASE("custom rows are symmetric and bounded") {
    const CustomMatching c{{{0.2, 0.8}, {0.5, 0.5}, {1.0, 0.0}}};
    const Matrix pi = participation_probabilities(c, 3, 2);
    for (int i = 0; i < 3; ++i) CHECK(pi(i, 0) + pi(i, 1) == doctest::Approx(1.0).epsilon(1e-12));
    const Matrix a = matching_probabilities(c, 3, 2);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        CHECK(a(i, j) == doctest::Approx(a(j, i)));
        CHECK(a(i, j) >= 0.0);
        CHECK(a(i, j) <= 1.0);
      }
    CHECK(a(0, 1) == doctest::Approx(0.2 * 0.5 + 0.8 * 0.5));
  }
  SUBCASE("bad rows") {
    CHECK_THROWS_AS(participation_probabilities(CustomMatching{{{0.5, 0.4}}}, 1, 2), ConfigError);
    CHECK_THROWS_AS(participation_probabilities(CustomMatching{{{1.0}}}, 2, 1), ConfigError);
    CHECK_THROWS_AS(participation_probabilities(FixedMatching{{0, 2}}, 2, 2), ConfigError);
  }
}

TEST_CASE("uniform matching draws are uniform") {
  RngStream s = StreamFactory(3, 0).stream(0, StreamPurpose::kMatching);
  std::vector<int> counts(4, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[draw_auction(UniformMatching{}, 0, 4, s)];
  const double sigma = std::sqrt(n * 0.25 * 0.75);
  for (int c : counts) CHECK(std::abs(c - n / 4.0) < 4 * sigma);
}
