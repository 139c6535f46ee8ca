#include "evlc/entropy.hpp"

#include <algorithm>
#include <numeric>

namespace evlc {

SubstitutionTable build_table(const Pmf& pmf) {
  std::array<std::uint8_t, 16> order;
  std::iota(order.begin(), order.end(), std::uint8_t(0));
  std::sort(order.begin(), order.end(), [&](std::uint8_t a, std::uint8_t b) {
    if (pmf[a] != pmf[b]) return pmf[a] > pmf[b];
    return a < b;
  });

  SubstitutionTable table;
  for (int rank = 0; rank < 16; ++rank) {
    table.symbol_of[std::size_t(rank)] = order[std::size_t(rank)];
    table.rank_of[order[std::size_t(rank)]] = std::uint8_t(rank);
  }
  return table;
}

void rice_encode(std::uint32_t n, int k, BitWriter& out) {
  out.put_ones(n >> k);
  out.put_bit(0);
  if (k > 0) out.put_bits(n & ((std::uint32_t(1) << k) - 1), k);
}

std::uint32_t rice_decode(BitReader& in, int k) {
  const std::uint64_t q = in.unary();
  const std::uint32_t m = k > 0 ? in.bits(k) : 0;
  return std::uint32_t((q << k) + m);
}

void encode_nibbles(std::span<const std::uint8_t> nibbles,
                    const SubstitutionTable& table, int k, BitWriter& out) {
  for (std::uint8_t s : nibbles) {
    rice_encode(table.rank_of[s], k, out);
  }
}

std::vector<std::uint8_t> decode_nibbles(BitReader& in, std::size_t count,
                                         const SubstitutionTable& table, int k) {
  std::vector<std::uint8_t> nibbles;
  nibbles.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t rank = rice_decode(in, k);
    if (rank > 15) {
      throw CorruptionError("decoded rank " + std::to_string(rank) + " out of range");
    }
    const std::uint8_t symbol = table.symbol_of[rank];
    if (symbol == 0) {
      throw CorruptionError("zero occupancy symbol inside a stream");
    }
    nibbles.push_back(symbol);
  }
  return nibbles;
}

}  // namespace evlc
