#include "karma/rng.hpp"

#include <cmath>
#include <numbers>

namespace karma {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t replication,
                          std::uint64_t agent, StreamPurpose purpose) noexcept {
  std::uint64_t h = mix64(base_seed);
  h = mix64(h ^ replication);
  h = mix64(h ^ (agent * 0xD1B54A32D192ED03ULL));
  h = mix64(h ^ static_cast<std::uint64_t>(purpose));
  return h;
}

double RngStream::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace karma
