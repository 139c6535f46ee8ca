#pragma once

#include <array>
#include <deque>

#include "evlc/quadtree.hpp"

namespace evlc {

// 16-bin probability mass function over occupancy symbols 0..15.
using Pmf = std::array<double, 16>;

inline Pmf uniform_pmf() {
  Pmf p;
  p.fill(1.0 / 16.0);
  return p;
}

// Empirical symbol frequencies of one unit's nibble stream. p[0] is always 0
// because valid streams are zero-free.
Pmf compute_pmf(const OccupancyStream& stream);

// Rolling window of the N most recent unit PMFs, oldest first. Pre-filled
// with uniform PMFs so encoder and decoder start from identical state.
class PmfBuffer {
 public:
  explicit PmfBuffer(int window);

  void push(const Pmf& pmf);

  const Pmf& operator[](int i) const { return history_[std::size_t(i)]; }
  int window() const { return int(history_.size()); }

  friend bool operator==(const PmfBuffer&, const PmfBuffer&) = default;

 private:
  std::deque<Pmf> history_;
};

}  // namespace evlc
