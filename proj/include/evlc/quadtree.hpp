#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evlc/event.hpp"

namespace evlc {

// Level-order occupancy nibbles for one coding unit's coordinate set.
//
// Level 1 holds the single root nibble; level D describes one-pixel leaves.
// Within a level, nibbles follow parent order; within a nibble the quadrants
// are fixed as bit 3 = NW, bit 2 = NE, bit 1 = SW, bit 0 = SE with y growing
// downward. These conventions are normative (see FORMAT.md). A value of 0
// never appears in a valid stream: a subdivided node has an occupied child.
struct OccupancyStream {
  std::vector<std::uint8_t> nibbles;  // values 1..15, level order
  int depth = 0;
};

// Smallest D with 2^D >= max(width, height); at least 1, so a 1x1 or 2x2
// sensor still gets one subdivision down to unit cells.
int required_depth(const SensorGeometry& geometry);

// Occupancy nibble for four child quadrants, q0=NW .. q3=SE.
constexpr std::uint8_t child_nibble(bool nw, bool ne, bool sw, bool se) {
  return std::uint8_t((nw ? 8 : 0) | (ne ? 4 : 0) | (sw ? 2 : 0) | (se ? 1 : 0));
}

// coords must be non-empty, strictly (x, y)-sorted, and inside [0, 2^depth).
OccupancyStream build_occupancy(std::span<const Coord> coords, int depth);

// Exact inverse of build_occupancy; result sorted by (x, y). Throws
// CorruptionError on a zero nibble or a stream violating node-count
// consistency.
std::vector<Coord> reconstruct_coords(const OccupancyStream& stream);

}  // namespace evlc
