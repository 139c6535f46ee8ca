#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "evlc/entropy.hpp"
#include "evlc/event.hpp"
#include "evlc/model.hpp"

namespace evlc {

inline constexpr char kStreamMagic[4] = {'L', 'C', 'L', '1'};
inline constexpr std::uint8_t kStreamVersion = 1;
inline constexpr std::size_t kHeaderSize = 60;

// Fixed 60-byte container header; see FORMAT.md for the byte layout.
struct FileHeader {
  std::uint8_t version = kStreamVersion;
  SensorGeometry geometry;
  std::uint8_t depth = 0;
  std::uint8_t k = 1;
  std::uint8_t window = 10;
  std::array<std::uint8_t, 32> model_hash{};
  std::uint64_t unit_count = 0;
  std::uint64_t base_timestamp = 0;
};

struct EncodeOptions {
  int k = 1;  // Rice parameter, global per file
};

// Nanoseconds spent per pipeline phase, accumulated over all units.
struct PhaseTimes {
  std::uint64_t quadtree = 0;  // occupancy build (encode) / reconstruction (decode)
  std::uint64_t predict = 0;   // model inference + substitution table
  std::uint64_t entropy = 0;   // Rice coding and bit IO
  std::uint64_t container = 0; // header, varints, polarity payload, PMF upkeep

  std::uint64_t total() const { return quadtree + predict + entropy + container; }
};

struct CodecStats {
  std::uint64_t units = 0;
  std::uint64_t events = 0;  // after deduplication
  std::uint64_t duplicates_dropped = 0;
  std::uint64_t occupancy_bytes = 0;
  std::uint64_t polarity_bytes = 0;
  PhaseTimes times;
};

// Thrown when a unit payload is damaged; carries everything decoded before
// the failure.
struct DecodeFailure : CorruptionError {
  DecodeFailure(const std::string& what, std::vector<Event> decoded_,
                std::uint64_t units_decoded_)
      : CorruptionError(what + " (after " + std::to_string(units_decoded_) +
                        " units)"),
        decoded(std::move(decoded_)),
        units_decoded(units_decoded_) {}
  std::vector<Event> decoded;
  std::uint64_t units_decoded;
};

// Full encoder pipeline: segment into units, then per unit build occupancy,
// predict the PMF from the rolling buffer, substitute, Rice-code, and append
// the byte-aligned unit record. Strictly causal: unit i never reads units > i.
std::vector<std::uint8_t> encode_stream(std::span<const Event> events,
                                        const SensorGeometry& geometry,
                                        const ModelWeights& weights,
                                        const EncodeOptions& options = {},
                                        CodecStats* stats = nullptr);

// Exact inverse of encode_stream. The weights must hash-match the header.
std::vector<Event> decode_stream(std::span<const std::uint8_t> bytes,
                                 const ModelWeights& weights,
                                 CodecStats* stats = nullptr);

FileHeader read_header(std::span<const std::uint8_t> bytes);

// One record's placement inside the container; every record and both of its
// payloads start on byte boundaries.
struct UnitBoundary {
  std::size_t offset = 0;  // record start, from the beginning of the stream
  std::uint64_t delta_t = 0;
  std::uint64_t event_count = 0;
  std::size_t occupancy_bytes = 0;
  std::size_t polarity_bytes = 0;
};

// Walks the container record by record without entropy decoding anything,
// using the stored event/byte counts. Validates that the records exactly
// tile the stream.
std::vector<UnitBoundary> walk_units(std::span<const std::uint8_t> bytes);

}  // namespace evlc
