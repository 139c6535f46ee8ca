#pragma once

// Deterministic random helpers on top of std::mt19937_64.
//
// The <random> distributions are implementation-defined, so every mapping
// from raw generator output to a range lives here: same seed, same sequence,
// on every platform.

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace evlc {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Unbiased integer in [0, bound); bound >= 1.
  std::uint32_t below(std::uint32_t bound) {
    const std::uint64_t span = std::uint64_t(bound);
    const std::uint64_t limit = (~std::uint64_t{0} / span) * span;
    std::uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return std::uint32_t(v % span);
  }

  // [0, 1) with 53 random bits.
  double unit() { return double(gen_() >> 11) * 0x1.0p-53; }

  double range(double lo, double hi) { return lo + (hi - lo) * unit(); }

  bool chance(double prob) { return unit() < prob; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(std::uint32_t(i))]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace evlc
