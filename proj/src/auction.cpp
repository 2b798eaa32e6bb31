#include "karma/auction.hpp"

#include <algorithm>
#include <cmath>

namespace karma {

AuctionClearer::AuctionClearer(const MechanismParams& mech)
    : mech_(mech), pools_(mech.n_auctions), priority_(mech.n_agents) {
  mech_.validate();
  for (auto& p : pools_) p.reserve(mech.n_agents);
}

void AuctionClearer::clear(std::span<const double> bids, std::span<const int> assignment,
                           std::uint64_t tie_word, PeriodOutcome& out) {
  const int n = mech_.n_agents;
  const int m_count = mech_.n_auctions;
  const int gamma = mech_.capacity;
  if (static_cast<int>(bids.size()) != n) throw ConfigError("clear_auction: bid vector length");
  if (!assignment.empty() && static_cast<int>(assignment.size()) != n)
    throw ConfigError("clear_auction: assignment vector length");

  out.winners.assign(n, 0);
  out.prices.assign(m_count, 0.0);
  out.payments.assign(n, 0.0);
  out.gains.assign(n, 0.0);
  out.competing_hi.assign(n, 0.0);
  out.competing_lo.assign(n, 0.0);

  for (auto& p : pools_) p.clear();
  for (int i = 0; i < n; ++i) {
    const int m = assignment.empty() ? 0 : assignment[i];
    if (m < 0 || m >= m_count) throw ConfigError("clear_auction: auction index out of range");
    if (!(bids[i] >= 0.0)) throw ConfigError("clear_auction: negative bid");
    pools_[m].push_back(i);
    priority_[i] = mix64(tie_word ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(i + 1)));
  }

  const auto ranks_before = [&](int a, int b) {
    if (bids[a] != bids[b]) return bids[a] > bids[b];
    return priority_[a] > priority_[b];
  };

  double price_sum = 0.0;
  for (int m = 0; m < m_count; ++m) {
    auto& pool = pools_[m];
    const int size = static_cast<int>(pool.size());
    if (size == 0) continue;
    const int ranked = std::min(size, gamma + 2);
    std::partial_sort(pool.begin(), pool.begin() + ranked, pool.end(), ranks_before);

    const auto bid_at = [&](int pos) { return pos < size ? bids[pool[pos]] : 0.0; };
    const double price = bid_at(gamma);
    out.prices[m] = price;
    price_sum += price;

    for (int pos = 0; pos < size; ++pos) {
      const int i = pool[pos];
      const bool wins = pos < gamma;
      out.winners[i] = wins ? 1 : 0;
      out.payments[i] = wins ? price : 0.0;
      // order statistics of the others: skip own slot when it lies above
      out.competing_hi[i] = pos < gamma ? bid_at(gamma) : bid_at(gamma - 1);
      out.competing_lo[i] = pos <= gamma ? bid_at(gamma + 1) : bid_at(gamma);
    }
  }

  const double gain = mech_.gain_share() * price_sum;
  std::fill(out.gains.begin(), out.gains.end(), gain);
}

PeriodOutcome clear_auction(const RoundBids& bids, const MechanismParams& mech,
                            RngStream& tie_stream) {
  AuctionClearer clearer(mech);
  PeriodOutcome out;
  clearer.clear(bids.bids, bids.assignment, tie_stream.next(), out);
  return out;
}

void record_costs(PeriodOutcome& outcome, std::span<const double> valuations, double time_saving) {
  const std::size_t n = outcome.winners.size();
  if (valuations.size() != n) throw ConfigError("record_costs: valuation vector length");
  outcome.costs.resize(n);
  outcome.saved.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = outcome.winners[i] ? time_saving * valuations[i] : 0.0;
    outcome.saved[i] = s;
    outcome.costs[i] = valuations[i] - s;
  }
}

double stationary_gain(double bid, const CompetingPair& d, double gain_share) {
  double price;
  if (bid > d.hi) {
    price = d.hi;
  } else if (bid > d.lo) {
    price = bid;
  } else {
    price = d.lo;
  }
  return gain_share * price;
}

Estimate residual_gain(const CompetingBidModel& model, double gain_share, int n_samples,
                       RngStream& stream) {
  if (n_samples < 1) throw ConfigError("residual_gain: need at least one sample");
  if (const auto* iid = std::get_if<IidPair>(&model); iid && !iid->price_setter_allowed)
    return {0.0, 0.0};
  if (const auto* emp = std::get_if<EmpiricalPairs>(&model)) {
    double s = 0.0;
    for (const auto& p : emp->pairs) s += p.hi - p.lo;
    return {gain_share * s / static_cast<double>(emp->pairs.size()), 0.0};
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int k = 0; k < n_samples; ++k) {
    const auto d = sample_competing(model, stream);
    const double gap = d.hi - d.lo;
    sum += gap;
    sum_sq += gap * gap;
  }
  const double n = n_samples;
  const double mean = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1)) : 0.0;
  return {gain_share * mean, gain_share * std::sqrt(var / n)};
}

}  // namespace karma
