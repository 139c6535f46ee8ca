#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "evlc/errors.hpp"
#include "evlc/pmf.hpp"

namespace evlc {

// MSB-first bit sink. take() pads the final partial byte with zero bits.
class BitWriter {
 public:
  void put_bit(std::uint32_t bit) { put_bits(bit & 1, 1); }

  // Writes the low `count` bits of value, most significant first. count <= 32.
  void put_bits(std::uint32_t value, int count) {
    acc_ = (acc_ << count) | (std::uint64_t(value) & ((std::uint64_t(1) << count) - 1));
    pending_ += count;
    while (pending_ >= 8) {
      pending_ -= 8;
      bytes_.push_back(std::uint8_t(acc_ >> pending_));
    }
  }

  void put_ones(std::uint64_t count) {
    while (count >= 24) {
      put_bits(0xffffff, 24);
      count -= 24;
    }
    if (count > 0) put_bits((std::uint32_t(1) << count) - 1, int(count));
  }

  std::size_t bit_count() const { return bytes_.size() * 8 + std::size_t(pending_); }

  // Pads to a byte boundary with zero bits.
  void align() {
    if (pending_ > 0) {
      bytes_.push_back(std::uint8_t(acc_ << (8 - pending_)));
      pending_ = 0;
    }
    acc_ = 0;
  }

  std::vector<std::uint8_t> take() {
    align();
    std::vector<std::uint8_t> out;
    out.swap(bytes_);
    return out;
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t acc_ = 0;
  int pending_ = 0;  // bits buffered in acc_, always < 8 between calls
};

// MSB-first bit source over a fixed payload. Reading past the end raises
// CorruptionError.
class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes)
      : bytes_(bytes), bit_end_(bytes.size() * 8) {}

  std::uint32_t bit() {
    if (pos_ >= bit_end_) throw CorruptionError("bit payload exhausted");
    const std::uint32_t b = (bytes_[pos_ >> 3] >> (7 - (pos_ & 7))) & 1;
    ++pos_;
    return b;
  }

  std::uint32_t bits(int count) {
    std::uint32_t v = 0;
    for (int i = 0; i < count; ++i) v = (v << 1) | bit();
    return v;
  }

  // Number of 1 bits before the 0 delimiter; consumes the delimiter.
  std::uint64_t unary() {
    std::uint64_t q = 0;
    while (bit() == 1) ++q;
    return q;
  }

  std::size_t consumed() const { return pos_; }
  std::size_t remaining() const { return bit_end_ - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t bit_end_;
  std::size_t pos_ = 0;
};

// Permutation pairing symbols with code ranks; the most probable symbol gets
// rank 0 and therefore the shortest Rice codeword.
struct SubstitutionTable {
  std::array<std::uint8_t, 16> rank_of{};
  std::array<std::uint8_t, 16> symbol_of{};
};

// Symbols sorted by probability descending; ties broken by ascending symbol
// value (normative, so both ends derive the same permutation).
SubstitutionTable build_table(const Pmf& pmf);

// Rice code: floor(n / 2^k) ones, a zero delimiter, then n mod 2^k in k bits,
// big-endian.
void rice_encode(std::uint32_t n, int k, BitWriter& out);
std::uint32_t rice_decode(BitReader& in, int k);

constexpr std::uint64_t rice_code_length(std::uint64_t n, int k) {
  return (n >> k) + 1 + std::uint64_t(k);
}

void encode_nibbles(std::span<const std::uint8_t> nibbles,
                    const SubstitutionTable& table, int k, BitWriter& out);

// Decodes `count` symbols; a decoded rank outside 0..15 or a symbol of 0 is
// a corruption error.
std::vector<std::uint8_t> decode_nibbles(BitReader& in, std::size_t count,
                                         const SubstitutionTable& table, int k);

}  // namespace evlc
