#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "karma/core.hpp"
#include "karma/rng.hpp"

namespace karma {

struct RoundBids {
  std::vector<double> bids;     // b_i >= 0
  std::vector<int> assignment;  // auction of each agent, 0-based; empty means all in auction 0
};

struct PeriodOutcome {
  std::vector<char> winners;      // x_i
  std::vector<double> prices;     // (gamma+1)-th highest bid of each auction
  std::vector<double> payments;   // z_i = x_i * price of own auction
  std::vector<double> gains;      // (gamma / N) * sum of prices, same for everyone
  std::vector<double> competing_hi;  // gamma-th highest bid among the others in i's auction
  std::vector<double> competing_lo;  // (gamma+1)-th highest, zero padded
  std::vector<double> costs;      // v_i (1 - x_i Delta)
  std::vector<double> saved;      // x_i Delta v_i
};

// Clears every auction of one round. Ties are broken by a strict random
// priority order drawn from `tie_stream` (one word per round). Auctions with
// at most gamma participants clear at price zero and everyone wins.
PeriodOutcome clear_auction(const RoundBids& bids, const MechanismParams& mech,
                            RngStream& tie_stream);

// Reusable scratch space for the simulation loop; results are identical to
// clear_auction.
class AuctionClearer {
 public:
  explicit AuctionClearer(const MechanismParams& mech);

  void clear(std::span<const double> bids, std::span<const int> assignment,
             std::uint64_t tie_word, PeriodOutcome& out);

 private:
  MechanismParams mech_;
  std::vector<std::vector<int>> pools_;
  std::vector<std::uint64_t> priority_;
};

// Fills costs and saved value; `saved` is the nonnegative value of time saved
// and `costs` the literal per-round cost (negative for winners when Delta > 1).
void record_costs(PeriodOutcome& outcome, std::span<const double> valuations, double time_saving);

// Gain received when bidding `bid` against (d_hi, d_lo) in the stationary
// setting: the price set by the winners, the agent, or the next loser.
double stationary_gain(double bid, const CompetingPair& d, double gain_share);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

// (gamma / N) * E[d_hi - d_lo]. Exact (zero standard error) when the model
// forbids price setting or is a finite empirical list.
Estimate residual_gain(const CompetingBidModel& model, double gain_share, int n_samples,
                       RngStream& stream);

}  // namespace karma
