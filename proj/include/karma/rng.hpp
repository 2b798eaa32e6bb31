#pragma once

#include <cstdint>
#include <random>

namespace karma {

// Every random draw in a simulation comes from a stream identified by
// (base seed, replication, agent, purpose). Streams never share state, so
// results do not depend on thread count or on how many draws other streams
// consumed.
enum class StreamPurpose : std::uint64_t {
  kValuation = 1,
  kCompeting = 2,
  kMatching = 3,
  kTieBreak = 4,
  kEstimation = 5,
  kInstance = 6,
};

// SplitMix64 finalizer; bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x) noexcept;

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t replication,
                          std::uint64_t agent, StreamPurpose purpose) noexcept;

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits; portable across standard libraries.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; only used for synthetic noise in diagnostics.
  double normal();

 private:
  std::mt19937_64 engine_;
};

// Hands out streams for one replication of one experiment.
class StreamFactory {
 public:
  StreamFactory(std::uint64_t base_seed, std::uint64_t replication)
      : base_seed_(base_seed), replication_(replication) {}

  RngStream stream(std::uint64_t agent, StreamPurpose purpose) const {
    return RngStream(derive_seed(base_seed_, replication_, agent, purpose));
  }

  std::uint64_t base_seed() const { return base_seed_; }
  std::uint64_t replication() const { return replication_; }

 private:
  std::uint64_t base_seed_;
  std::uint64_t replication_;
};

}  // namespace karma
