#include "evlc/codec.hpp"

#include <chrono>

#include "evlc/io.hpp"
#include "evlc/pmf.hpp"
#include "evlc/quadtree.hpp"

namespace evlc {
namespace {

using Clock = std::chrono::steady_clock;

// Phase stopwatch that is free when no stats sink is attached.
class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled) {
    if (enabled_) last_ = Clock::now();
  }
  void lap(std::uint64_t& sink) {
    if (!enabled_) return;
    const auto now = Clock::now();
    sink += std::uint64_t(
        std::chrono::duration_cast<std::chrono::nanoseconds>(now - last_).count());
    last_ = now;
  }

 private:
  bool enabled_;
  Clock::time_point last_;
};

void write_header(std::vector<std::uint8_t>& out, const FileHeader& h) {
  out.insert(out.end(), kStreamMagic, kStreamMagic + 4);
  append_u8(out, h.version);
  append_u16le(out, std::uint16_t(h.geometry.width));
  append_u16le(out, std::uint16_t(h.geometry.height));
  append_u8(out, h.depth);
  append_u8(out, h.k);
  append_u8(out, h.window);
  out.insert(out.end(), h.model_hash.begin(), h.model_hash.end());
  append_u64le(out, h.unit_count);
  append_u64le(out, h.base_timestamp);
}

// Decodes one unit's occupancy nibbles level by level: level 1 holds one
// codeword and each further level holds as many codewords as the previous
// level has occupied quadrants.
OccupancyStream decode_occupancy(BitReader& in, const SubstitutionTable& table,
                                 int k, int depth) {
  OccupancyStream stream;
  stream.depth = depth;
  std::size_t level_count = 1;
  for (int l = 1; l <= depth; ++l) {
    const std::vector<std::uint8_t> level =
        decode_nibbles(in, level_count, table, k);
    std::size_t next = 0;
    for (std::uint8_t n : level) next += std::size_t(std::popcount(unsigned(n)));
    stream.nibbles.insert(stream.nibbles.end(), level.begin(), level.end());
    level_count = next;
  }
  return stream;
}

}  // namespace

std::vector<std::uint8_t> encode_stream(std::span<const Event> events,
                                        const SensorGeometry& geometry,
                                        const ModelWeights& weights,
                                        const EncodeOptions& options,
                                        CodecStats* stats) {
  if (options.k < 0 || options.k > 8) {
    throw std::invalid_argument("rice parameter k must be in [0, 8]");
  }
  SensorGeometry::checked(geometry.width, geometry.height);
  const int depth = required_depth(geometry);

  Stopwatch watch(stats != nullptr);
  const SegmentResult segments = segment_into_units(events, geometry);
  if (stats) {
    stats->units = segments.units.size();
    stats->duplicates_dropped = segments.duplicates_dropped;
    watch.lap(stats->times.container);
  }

  FileHeader header;
  header.geometry = geometry;
  header.depth = std::uint8_t(depth);
  header.k = std::uint8_t(options.k);
  header.window = std::uint8_t(weights.window);
  header.model_hash = weights_hash(weights);
  header.unit_count = segments.units.size();
  header.base_timestamp = segments.units.empty() ? 0 : segments.units.front().t;

  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + events.size() * 2);
  write_header(out, header);

  PmfBuffer buffer(weights.window);
  std::uint64_t prev_t = header.base_timestamp;

  for (const CodingUnit& unit : segments.units) {
    if (stats) watch.lap(stats->times.container);

    const OccupancyStream occupancy = build_occupancy(unit.coords, depth);
    if (stats) watch.lap(stats->times.quadtree);

    const Pmf predicted = predict(buffer, weights);
    const SubstitutionTable table = build_table(predicted);
    if (stats) watch.lap(stats->times.predict);

    BitWriter occ_bits;
    encode_nibbles(occupancy.nibbles, table, options.k, occ_bits);
    const std::vector<std::uint8_t> occ_payload = occ_bits.take();
    if (stats) watch.lap(stats->times.entropy);

    append_varint(out, unit.t - prev_t);
    append_varint(out, unit.coords.size());
    append_varint(out, occ_payload.size());
    out.insert(out.end(), occ_payload.begin(), occ_payload.end());

    BitWriter pol_bits;
    for (std::uint8_t bit : polarity_bits(unit)) pol_bits.put_bit(bit);
    const std::vector<std::uint8_t> pol_payload = pol_bits.take();
    out.insert(out.end(), pol_payload.begin(), pol_payload.end());

    buffer.push(compute_pmf(occupancy));
    prev_t = unit.t;
    if (stats) {
      stats->events += unit.coords.size();
      stats->occupancy_bytes += occ_payload.size();
      stats->polarity_bytes += pol_payload.size();
      watch.lap(stats->times.container);
    }
  }
  return out;
}

FileHeader read_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) {
    throw FormatError("stream shorter than the fixed header");
  }
  for (int i = 0; i < 4; ++i) {
    if (bytes[std::size_t(i)] != std::uint8_t(kStreamMagic[i])) {
      throw FormatError("bad stream magic");
    }
  }
  ByteCursor cur(bytes);
  cur.take(4);

  FileHeader h;
  h.version = cur.u8();
  if (h.version != kStreamVersion) {
    throw FormatError("unsupported stream version " + std::to_string(h.version));
  }
  h.geometry.width = cur.u16le();
  h.geometry.height = cur.u16le();
  if (h.geometry.width < 1 || h.geometry.height < 1) {
    throw FormatError("header geometry has a zero dimension");
  }
  h.depth = cur.u8();
  h.k = cur.u8();
  h.window = cur.u8();
  if (h.depth != std::uint8_t(required_depth(h.geometry))) {
    throw FormatError("header depth does not match geometry");
  }
  if (h.k > 8) throw FormatError("rice parameter out of range");
  if (h.window < 1) throw FormatError("PMF window must be >= 1");
  const auto hash = cur.take(32);
  std::copy(hash.begin(), hash.end(), h.model_hash.begin());
  h.unit_count = cur.u64le();
  h.base_timestamp = cur.u64le();
  return h;
}

std::vector<Event> decode_stream(std::span<const std::uint8_t> bytes,
                                 const ModelWeights& weights,
                                 CodecStats* stats) {
  const FileHeader header = read_header(bytes);
  if (header.window != std::uint8_t(weights.window) ||
      header.model_hash != weights_hash(weights)) {
    throw ModelError("stream was encoded with different model weights");
  }

  Stopwatch watch(stats != nullptr);
  ByteCursor cur(bytes.subspan(kHeaderSize));
  PmfBuffer buffer(weights.window);
  std::vector<Event> events;
  std::uint64_t t = header.base_timestamp;
  std::uint64_t units_done = 0;

  try {
    for (std::uint64_t u = 0; u < header.unit_count; ++u) {
      const std::uint64_t dt = cur.varint();
      if (u > 0 && dt == 0) {
        throw CorruptionError("unit timestamps must strictly increase");
      }
      t += dt;
      const std::uint64_t event_count = cur.varint();
      if (event_count == 0) {
        throw CorruptionError("unit with zero events");
      }
      const std::uint64_t occ_len = cur.varint();
      const auto occ_payload = cur.take(std::size_t(occ_len));
      if (stats) watch.lap(stats->times.container);

      const Pmf predicted = predict(buffer, weights);
      const SubstitutionTable table = build_table(predicted);
      if (stats) watch.lap(stats->times.predict);

      BitReader occ_bits(occ_payload);
      const OccupancyStream occupancy =
          decode_occupancy(occ_bits, table, header.k, header.depth);
      if ((occ_bits.consumed() + 7) / 8 != occ_len) {
        throw CorruptionError("occupancy payload length mismatch");
      }
      while (occ_bits.remaining() > 0) {
        if (occ_bits.bit() != 0) {
          throw CorruptionError("nonzero padding after occupancy payload");
        }
      }
      if (stats) watch.lap(stats->times.entropy);

      std::vector<Coord> coords = reconstruct_coords(occupancy);
      if (coords.size() != event_count) {
        throw CorruptionError("event count disagrees with decoded leaves");
      }
      for (const Coord& c : coords) {
        if (c.x >= header.geometry.width || c.y >= header.geometry.height) {
          throw CorruptionError("decoded coordinate outside geometry");
        }
      }
      if (stats) watch.lap(stats->times.quadtree);

      const auto pol_payload = cur.take((std::size_t(event_count) + 7) / 8);
      BitReader pol_bits(pol_payload);
      for (const Coord& c : coords) {
        Event e;
        e.t = t;
        e.x = c.x;
        e.y = c.y;
        e.p = pol_bits.bit() ? std::int8_t(1) : std::int8_t(-1);
        events.push_back(e);
      }

      buffer.push(compute_pmf(occupancy));
      ++units_done;
      if (stats) {
        ++stats->units;
        stats->events += event_count;
        stats->occupancy_bytes += occ_len;
        stats->polarity_bytes += pol_payload.size();
        watch.lap(stats->times.container);
      }
    }
  } catch (const CorruptionError& e) {
    throw DecodeFailure(e.what(), std::move(events), units_done);
  }

  if (!cur.at_end()) {
    throw FormatError("trailing bytes after the last unit record");
  }
  return events;
}

std::vector<UnitBoundary> walk_units(std::span<const std::uint8_t> bytes) {
  const FileHeader header = read_header(bytes);
  ByteCursor cur(bytes.subspan(kHeaderSize));

  std::vector<UnitBoundary> boundaries;
  boundaries.reserve(std::size_t(header.unit_count));
  for (std::uint64_t u = 0; u < header.unit_count; ++u) {
    UnitBoundary b;
    b.offset = kHeaderSize + cur.offset();
    b.delta_t = cur.varint();
    b.event_count = cur.varint();
    b.occupancy_bytes = std::size_t(cur.varint());
    b.polarity_bytes = (std::size_t(b.event_count) + 7) / 8;
    cur.take(b.occupancy_bytes);
    cur.take(b.polarity_bytes);
    boundaries.push_back(b);
  }
  if (!cur.at_end()) {
    throw FormatError("trailing bytes after the last unit record");
  }
  return boundaries;
}

}  // namespace evlc
