#include "evlc/quadtree.hpp"

#include <algorithm>
#include <bit>

namespace evlc {
namespace {

// Spread the low 16 bits of v to even bit positions.
std::uint32_t part1by1(std::uint32_t v) {
  v &= 0xffff;
  v = (v | (v << 8)) & 0x00ff00ff;
  v = (v | (v << 4)) & 0x0f0f0f0f;
  v = (v | (v << 2)) & 0x33333333;
  v = (v | (v << 1)) & 0x55555555;
  return v;
}

std::uint32_t compact1by1(std::uint32_t v) {
  v &= 0x55555555;
  v = (v | (v >> 1)) & 0x33333333;
  v = (v | (v >> 2)) & 0x0f0f0f0f;
  v = (v | (v >> 4)) & 0x00ff00ff;
  v = (v | (v >> 8)) & 0x0000ffff;
  return v;
}

// Interleaved (y, x) code; the 2-bit digit at each level equals the quadrant
// index q = 2*[lower half] + [right half], so ascending code order matches
// the nibble's q0..q3 child order.
std::uint32_t morton(Coord c) {
  return part1by1(c.x) | (part1by1(c.y) << 1);
}

Coord demorton(std::uint32_t m) {
  return Coord{std::uint16_t(compact1by1(m)), std::uint16_t(compact1by1(m >> 1))};
}

}  // namespace

int required_depth(const SensorGeometry& geometry) {
  if (geometry.width < 1 || geometry.height < 1) {
    throw std::invalid_argument("geometry dimensions must be positive");
  }
  const std::uint32_t side = std::max(geometry.width, geometry.height);
  int d = 1;
  while ((std::uint32_t(1) << d) < side) ++d;
  return d;
}

OccupancyStream build_occupancy(std::span<const Coord> coords, int depth) {
  if (coords.empty()) {
    throw std::invalid_argument("occupancy of an empty coordinate set is undefined");
  }
  if (depth < 1 || depth > 16) {
    throw std::invalid_argument("depth must be in [1, 16]");
  }
  const std::uint32_t side = std::uint32_t(1) << depth;

  std::vector<std::uint32_t> codes;
  codes.reserve(coords.size());
  for (const Coord& c : coords) {
    if (c.x >= side || c.y >= side) {
      throw BoundsError("coordinate (" + std::to_string(c.x) + ", " +
                        std::to_string(c.y) + ") outside 2^" +
                        std::to_string(depth) + " square");
    }
    codes.push_back(morton(c));
  }
  std::sort(codes.begin(), codes.end());

  OccupancyStream stream;
  stream.depth = depth;
  stream.nibbles.reserve(codes.size() * std::size_t(depth) / 2 + 4);

  // Breadth-first over [begin, end) ranges of the sorted codes; sorted order
  // keeps each node's four children contiguous.
  struct Node {
    std::uint32_t begin, end;
  };
  std::vector<Node> level = {{0, std::uint32_t(codes.size())}};
  std::vector<Node> next;

  for (int l = 1; l <= depth; ++l) {
    const int shift = 2 * (depth - l);
    next.clear();
    for (const Node& node : level) {
      std::uint8_t nibble = 0;
      std::uint32_t i = node.begin;
      for (int q = 0; q < 4 && i < node.end; ++q) {
        std::uint32_t j = i;
        while (j < node.end && ((codes[j] >> shift) & 3) == std::uint32_t(q)) ++j;
        if (j > i) {
          nibble |= std::uint8_t(1 << (3 - q));
          if (l < depth) next.push_back({i, j});
          i = j;
        }
      }
      stream.nibbles.push_back(nibble);
    }
    level.swap(next);
  }
  return stream;
}

std::vector<Coord> reconstruct_coords(const OccupancyStream& stream) {
  if (stream.depth < 1 || stream.depth > 16) {
    throw CorruptionError("occupancy depth out of range");
  }
  const std::size_t total = stream.nibbles.size();
  std::size_t idx = 0;

  std::vector<std::uint32_t> prefixes = {0};
  std::vector<std::uint32_t> next;
  std::vector<Coord> coords;

  for (int l = 1; l <= stream.depth; ++l) {
    next.clear();
    for (std::uint32_t prefix : prefixes) {
      if (idx >= total) {
        throw CorruptionError("occupancy stream ends before all nodes are described");
      }
      const std::uint8_t nibble = stream.nibbles[idx++];
      if (nibble == 0 || nibble > 15) {
        throw CorruptionError("invalid occupancy nibble value " + std::to_string(nibble));
      }
      for (int q = 0; q < 4; ++q) {
        if (nibble & (1 << (3 - q))) {
          const std::uint32_t child = (prefix << 2) | std::uint32_t(q);
          if (l == stream.depth) {
            coords.push_back(demorton(child));
          } else {
            next.push_back(child);
          }
        }
      }
    }
    prefixes.swap(next);
  }

  if (idx != total) {
    throw CorruptionError("occupancy stream has trailing nibbles");
  }
  std::sort(coords.begin(), coords.end());
  return coords;
}

}  // namespace evlc
