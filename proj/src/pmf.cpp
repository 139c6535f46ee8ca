#include "evlc/pmf.hpp"

#include <stdexcept>

namespace evlc {

Pmf compute_pmf(const OccupancyStream& stream) {
  if (stream.nibbles.empty()) {
    throw std::invalid_argument("PMF of an empty occupancy stream is undefined");
  }
  std::array<std::uint64_t, 16> counts{};
  for (std::uint8_t n : stream.nibbles) ++counts[n];

  Pmf p{};
  const double total = double(stream.nibbles.size());
  for (int s = 0; s < 16; ++s) p[std::size_t(s)] = double(counts[std::size_t(s)]) / total;
  return p;
}

PmfBuffer::PmfBuffer(int window) {
  if (window < 1) {
    throw std::invalid_argument("PMF window must be >= 1");
  }
  history_.assign(std::size_t(window), uniform_pmf());
}

void PmfBuffer::push(const Pmf& pmf) {
  history_.pop_front();
  history_.push_back(pmf);
}

}  // namespace evlc
