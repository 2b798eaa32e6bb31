#include <cmath>
#include <vector>

#include "doctest.h"
#include "karma/strategies.hpp"

using namespace karma;

namespace {

AgentState state(double k, double mu) {
  AgentState s;
  s.karma = k, s.multiplier = mu;
  return s;
}

}  // namespace

TEST_CASE("karma pacing bid") {
  AgentParams p;  // bounds [0.1, 1000]
  CHECK(bid_karma_pacing(state(100, 2), 0.5, p, 5) == doctest::Approx(1.25));
  CHECK(bid_karma_pacing(state(100, 0.05), 1.0, p, 5) == doctest::Approx(50));
  CHECK(bid_karma_pacing(state(3, 0.1), 1.0, p, 5) == doctest::Approx(3));
  CHECK(bid_karma_pacing(state(100, 5000), 1.0, p, 5) == doctest::Approx(5.0 / 1000));
  CHECK(bid_karma_pacing(state(0, 2), 1.0, p, 5) == 0.0);
}

TEST_CASE("karma pacing update is never projected") {
  const AgentState a = update_karma_pacing(state(10, 5), 0.3, 0.04, 0.01);
  CHECK(a.multiplier == doctest::Approx(5.0026));
  CHECK(a.karma == doctest::Approx(10 - 0.26));
  CHECK(a.round == 2);

  const AgentState b = update_karma_pacing(state(10, 5), 0.2, 0.2, 0.01);
  CHECK(b.multiplier == 5);
  CHECK(b.karma == 10);

  const AgentState c = update_karma_pacing(state(10, 0.12), 0.0, 0.1, 0.5);
  CHECK(c.multiplier == doctest::Approx(0.07));
}

TEST_CASE("adaptive pacing bid") {
  CHECK(bid_adaptive_pacing(state(100, 10), 0.4, 5) == doctest::Approx(0.2));
  CHECK(bid_adaptive_pacing(state(0, 10), 0.4, 5) == 0.0);
  CHECK(bid_adaptive_pacing(state(1e9, 0.1), 1.0, 5) == doctest::Approx(50));
}

TEST_CASE("adaptive pacing update") {
  const double T = 400, eps = 40 / std::sqrt(T);
  const AgentState a = update_adaptive_pacing(state(80, 10), 0.0, 0.0, eps, 0.2, 0.1, 1000);
  CHECK(a.multiplier == doctest::Approx(10 - eps * 0.2));
  CHECK(a.karma == 80);

  const AgentState b = update_adaptive_pacing(state(80, 1000), 0.9, 0.0, 0.5, 0.2, 0.1, 1000);
  CHECK(b.multiplier == 1000);
  CHECK(b.karma == doctest::Approx(79.1));

  const AgentState c = update_adaptive_pacing(state(80, 3), 0.2, 0.05, 0.5, 0.2, 0.1, 1000);
  CHECK(c.multiplier == 3);
  CHECK(c.karma == doctest::Approx(80 - 0.2 + 0.05));

  const AgentState d = update_adaptive_pacing(state(80, 0.11), 0.0, 0.0, 1.0, 0.2, 0.1, 1000);
  CHECK(d.multiplier == 0.1);
}

TEST_CASE("gain-aware adaptive pacing") {
  CHECK(bid_adaptive_pacing_with_gain(state(100, 0.5), 0.6, 5) == doctest::Approx(2));
  CHECK(bid_adaptive_pacing_with_gain(state(1, 0.0), 0.6, 5) == doctest::Approx(1));

  const AgentState a = update_adaptive_pacing_with_gain(state(10, 0), 0.0, 0.05, 0.01, 0.04, 1000);
  CHECK(a.multiplier == 0.0);
  CHECK(a.karma == doctest::Approx(10.05));

  const AgentState b = update_adaptive_pacing_with_gain(state(10, 0.3), 0.09, 0.05, 0.01, 0.04, 1000);
  CHECK(b.multiplier == doctest::Approx(0.3));
}

TEST_CASE("deviation strategies") {
  AgentParams p;
  const AgentState s = state(100, 2);
  CHECK(place_bid(ScaledDeviation(2.0, LearnerKind::kKarmaPacing), s, 0.5, p, 5) ==
        doctest::Approx(2.5));
  CHECK(place_bid(ScaledDeviation(100.0, LearnerKind::kKarmaPacing), s, 0.5, p, 5) ==
        doctest::Approx(100));
  CHECK(place_bid(TruthfulCapped(5.5), s, 1.0, p, 5) == doctest::Approx(5 / 5.5));
  CHECK_THROWS_AS(ScaledDeviation(0.0, LearnerKind::kKarmaPacing), ConfigError);
  CHECK_THROWS_AS(TruthfulCapped(-1.0), ConfigError);

  auto plan = std::make_shared<const std::vector<double>>(std::vector<double>{1.0, 0.0, 0.5});
  const Strategy h = HindsightReplay{plan};
  AgentState r = state(7, 2);
  CHECK(place_bid(h, r, 0.3, p, 5) == 7);
  r.round = 2;
  CHECK(place_bid(h, r, 0.3, p, 5) == 0);
  r.round = 3;
  CHECK(place_bid(h, r, 0.3, p, 5) == 7);
}

TEST_CASE("advance dispatches to the learner") {
  AgentParams p;
  p.step = FixedStep(0.1);
  p.target_rate = 0.2;
  const AgentState s = state(10, 2);
  CHECK(advance(KarmaPacing{}, s, 0.5, 0.1, p, 100).multiplier == doctest::Approx(2.04));
  CHECK(advance(AdaptivePacing{}, s, 0.5, 0.1, p, 100).multiplier == doctest::Approx(2.03));
  CHECK(advance(AdaptivePacingWithGain{}, s, 0.5, 0.1, p, 100).multiplier ==
        doctest::Approx(2.02));
  const AgentState t = advance(TruthfulCapped(3.0), s, 0.5, 0.1, p, 100);
  CHECK(t.multiplier == 2);
  CHECK(t.karma == doctest::Approx(9.6));
}

TEST_CASE("hitting times") {
  const std::vector<double> mu(4, 1.0);
  SUBCASE("all conditions hold") {
    const std::vector<double> k{10, 10, 10, 10};
    const auto h = hitting_time(k, mu, 1.0, 0.1, 1000);
    CHECK(h.overall == 4);
  }
  SUBCASE("karma falls below the floor at t = 3") {
    const std::vector<double> k{10, 10, 0.1, 10};
    const auto h = hitting_time(k, mu, 0.1, 0.1, 1000);  // floor Delta / mu_lo = 1
    CHECK(h.karma == 2);
    CHECK(h.mu_lo == 4);
    CHECK(h.overall == 2);
  }
  SUBCASE("multiplier leaves the box") {
    const std::vector<double> k{10, 10, 10, 10};
    const std::vector<double> m{1, 0.05, 1, 2000};
    const auto h = hitting_time(k, m, 0.1, 0.1, 1000);
    CHECK(h.mu_lo == 1);
    CHECK(h.mu_hi == 3);
    CHECK(h.overall == 1);
  }
  SUBCASE("fails at once") {
    const std::vector<double> k{0.0, 10};
    const std::vector<double> m{1, 1};
    CHECK(hitting_time(k, m, 1.0, 0.1, 1000).overall == 0);
  }
  SUBCASE("online tracker agrees") {
    const std::vector<double> k{10, 9, 12, 0.5, 10};
    const std::vector<double> m{1, 2, 0.09, 3, 1};
    HittingTimeTracker tr(1.0, 0.1, 1000);
    for (int t = 0; t < 5; ++t) tr.observe(t + 1, k[t], m[t]);
    const auto a = tr.result(5), b = hitting_time(k, m, 0.1, 0.1, 1000);
    CHECK(a.karma == b.karma);
    CHECK(a.mu_lo == b.mu_lo);
    CHECK(a.overall == b.overall);
    CHECK(a.overall == 2);
  }
  SUBCASE("empty trace") {
    CHECK_THROWS(hitting_time({}, {}, 1.0, 0.1, 1000));
  }
}
