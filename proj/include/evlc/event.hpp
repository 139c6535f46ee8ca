#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evlc/errors.hpp"

namespace evlc {

// One sensor event. Polarity is +1 or -1.
struct Event {
  std::uint64_t t = 0;  // microseconds
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t p = 1;

  friend bool operator==(const Event&, const Event&) = default;
};

struct SensorGeometry {
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  // Validates 1 <= width, height <= 65535.
  static SensorGeometry checked(std::uint32_t width, std::uint32_t height);

  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

struct Coord {
  std::uint16_t x = 0;
  std::uint16_t y = 0;

  // (x, y) lexicographic.
  friend auto operator<=>(const Coord&, const Coord&) = default;
};

// All events sharing one timestamp; coords strictly increasing in (x, y),
// polarities aligned with coords.
struct CodingUnit {
  std::uint64_t t = 0;
  std::vector<Coord> coords;
  std::vector<std::int8_t> polarities;
};

enum class InputFormat { kCsv, kRaw32 };

// CSV: UTF-8, one `t,x,y,p` line per event, LF terminated, no header,
// p in {1,-1}. Validates bounds against the geometry and that timestamps
// never decrease.
std::vector<Event> parse_csv(std::span<const std::uint8_t> bytes,
                             const SensorGeometry& geometry);

// raw32: little-endian u32 records with x in bits 0-13, y in bits 14-27,
// polarity in bit 28 (1 = positive), bits 29-31 zero. `timestamps` is the
// sidecar stream of little-endian u64 microsecond values, one per record.
std::vector<Event> parse_raw32(std::span<const std::uint8_t> records,
                               std::span<const std::uint8_t> timestamps,
                               const SensorGeometry& geometry);

// Canonical CSV serialization (minimal decimal digits, LF line ends).
std::string to_csv(std::span<const Event> events);

void to_raw32(std::span<const Event> events,
              std::vector<std::uint8_t>& records,
              std::vector<std::uint8_t>& timestamps);

struct SegmentResult {
  std::vector<CodingUnit> units;
  std::uint64_t duplicates_dropped = 0;
};

// One unit per distinct timestamp carrying at least one event, in timestamp
// order. Duplicate (t, x, y) with equal polarity is dropped and counted;
// conflicting polarity at the same location is a hard error.
SegmentResult segment_into_units(std::span<const Event> events,
                                 const SensorGeometry& geometry);

// Bit i is 1 iff polarities[i] == +1.
std::vector<std::uint8_t> polarity_bits(const CodingUnit& unit);

// Size of the raw 32-bits-per-event representation; the CR denominator.
constexpr std::uint64_t evt2_size_bits(std::uint64_t n_events) {
  return 32 * n_events;
}

// Smallest geometry containing every event; (1, 1) for an empty stream.
SensorGeometry infer_geometry(std::span<const Event> events);

}  // namespace evlc
