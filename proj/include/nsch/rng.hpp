#pragma once

// Portable 64-bit linear congruential generator used for random initial data.
//
//   state <- state * 6364136223846793005 + 1442695040888963407  (mod 2^64)
//   uniform = (state >> 11) * 2^-53                              in [0, 1)

#include <cstdint>

namespace nsch {

class Lcg64 {
 public:
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
  static constexpr std::uint64_t kIncrement = 1442695040888963407ULL;

  explicit Lcg64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ = state_ * kMultiplier + kIncrement;
    return state_;
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform in [-amplitude, amplitude).
  double symmetric(double amplitude) { return amplitude * (2.0 * uniform() - 1.0); }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace nsch
