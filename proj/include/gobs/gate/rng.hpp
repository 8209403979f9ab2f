#pragma once

#include <cstdint>

#include "gobs/extract/embedding.hpp"

namespace gobs {

// Counter-based generator: draw k depends only on (seed, k), so a trace can
// be replayed from the seed and the number of draws consumed.
class RngState {
 public:
  RngState() = default;
  explicit RngState(std::uint64_t seed, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

  std::uint64_t next_u64() {
    std::uint64_t s = seed_ ^ (counter_++ * 0xd1b54a32d192ed03ULL);
    detail::splitmix64(s);
    return detail::splitmix64(s);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  bool operator==(const RngState&) const = default;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace gobs
