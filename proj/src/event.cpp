#include "evlc/event.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "evlc/io.hpp"

namespace evlc {
namespace {

const char* parse_u64(const char* p, const char* end, std::uint64_t& out,
                      std::size_t line_offset) {
  auto [ptr, ec] = std::from_chars(p, end, out);
  if (ec != std::errc{} || ptr == p) {
    throw ParseError("expected unsigned integer", line_offset);
  }
  return ptr;
}

const char* expect_comma(const char* p, const char* end, std::size_t line_offset) {
  if (p == end || *p != ',') throw ParseError("expected ','", line_offset);
  return p + 1;
}

void check_event(const Event& e, const SensorGeometry& geometry,
                 std::uint64_t prev_t, bool have_prev) {
  if (e.x >= geometry.width || e.y >= geometry.height) {
    throw BoundsError("event (" + std::to_string(e.x) + ", " + std::to_string(e.y) +
                      ") outside geometry " + std::to_string(geometry.width) + "x" +
                      std::to_string(geometry.height));
  }
  if (have_prev && e.t < prev_t) {
    throw OrderingError("decreasing timestamp " + std::to_string(e.t) +
                        " after " + std::to_string(prev_t));
  }
}

}  // namespace

SensorGeometry SensorGeometry::checked(std::uint32_t width, std::uint32_t height) {
  if (width < 1 || height < 1 || width > 65535 || height > 65535) {
    throw std::invalid_argument("geometry must be within 1x1 .. 65535x65535");
  }
  return SensorGeometry{width, height};
}

std::vector<Event> parse_csv(std::span<const std::uint8_t> bytes,
                             const SensorGeometry& geometry) {
  std::vector<Event> events;
  const char* data = reinterpret_cast<const char*>(bytes.data());
  const char* end = data + bytes.size();
  const char* p = data;
  std::uint64_t prev_t = 0;

  while (p != end) {
    const std::size_t line_offset = std::size_t(p - data);
    const char* eol = std::find(p, end, '\n');
    const char* line_end = eol;
    if (line_end != p && line_end[-1] == '\r') --line_end;  // tolerate CRLF

    if (line_end != p) {
      Event e;
      std::uint64_t v = 0;
      const char* q = parse_u64(p, line_end, v, line_offset);
      e.t = v;
      q = expect_comma(q, line_end, line_offset);
      q = parse_u64(q, line_end, v, line_offset);
      if (v > 65535) throw ParseError("x out of 16-bit range", line_offset);
      e.x = std::uint16_t(v);
      q = expect_comma(q, line_end, line_offset);
      q = parse_u64(q, line_end, v, line_offset);
      if (v > 65535) throw ParseError("y out of 16-bit range", line_offset);
      e.y = std::uint16_t(v);
      q = expect_comma(q, line_end, line_offset);
      if (line_end - q == 1 && *q == '1') {
        e.p = 1;
      } else if (line_end - q == 2 && q[0] == '-' && q[1] == '1') {
        e.p = -1;
      } else {
        throw ParseError("polarity must be 1 or -1", line_offset);
      }

      check_event(e, geometry, prev_t, !events.empty());
      prev_t = e.t;
      events.push_back(e);
    }

    p = (eol == end) ? end : eol + 1;
  }
  return events;
}

std::vector<Event> parse_raw32(std::span<const std::uint8_t> records,
                               std::span<const std::uint8_t> timestamps,
                               const SensorGeometry& geometry) {
  if (records.size() % 4 != 0) {
    throw ParseError("raw32 record stream not a multiple of 4 bytes", records.size() & ~std::size_t{3});
  }
  const std::size_t n = records.size() / 4;
  if (timestamps.size() != n * 8) {
    throw ParseError("timestamp sidecar length does not match record count",
                     timestamps.size());
  }

  ByteCursor rec(records);
  ByteCursor ts(timestamps);
  std::vector<Event> events;
  events.reserve(n);
  std::uint64_t prev_t = 0;

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t offset = rec.offset();
    const std::uint32_t word = rec.u32le();
    if ((word >> 29) != 0) {
      throw ParseError("raw32 reserved bits set", offset);
    }
    Event e;
    e.x = std::uint16_t(word & 0x3fff);
    e.y = std::uint16_t((word >> 14) & 0x3fff);
    e.p = (word >> 28) & 1 ? std::int8_t(1) : std::int8_t(-1);
    e.t = ts.u64le();

    check_event(e, geometry, prev_t, i > 0);
    prev_t = e.t;
    events.push_back(e);
  }
  return events;
}

std::string to_csv(std::span<const Event> events) {
  std::string out;
  out.reserve(events.size() * 16);
  char buf[48];
  for (const Event& e : events) {
    const int len = std::snprintf(buf, sizeof buf, "%llu,%u,%u,%d\n",
                                  static_cast<unsigned long long>(e.t),
                                  unsigned(e.x), unsigned(e.y), int(e.p));
    out.append(buf, std::size_t(len));
  }
  return out;
}

void to_raw32(std::span<const Event> events,
              std::vector<std::uint8_t>& records,
              std::vector<std::uint8_t>& timestamps) {
  records.clear();
  timestamps.clear();
  records.reserve(events.size() * 4);
  timestamps.reserve(events.size() * 8);
  for (const Event& e : events) {
    std::uint32_t word = std::uint32_t(e.x) | (std::uint32_t(e.y) << 14);
    if (e.p > 0) word |= 1u << 28;
    append_u32le(records, word);
    append_u64le(timestamps, e.t);
  }
}

SegmentResult segment_into_units(std::span<const Event> events,
                                 const SensorGeometry& geometry) {
  SegmentResult result;
  std::uint64_t prev_t = 0;

  std::size_t i = 0;
  while (i < events.size()) {
    const std::uint64_t t = events[i].t;
    if (!result.units.empty() && t < prev_t) {
      throw OrderingError("decreasing timestamp " + std::to_string(t));
    }
    std::size_t j = i;
    while (j < events.size() && events[j].t == t) ++j;

    // Sort this timestamp's events by (x, y); polarity rides along.
    std::vector<std::size_t> order(j - i);
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = i + k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const Event& ea = events[a];
      const Event& eb = events[b];
      return ea.x != eb.x ? ea.x < eb.x : ea.y < eb.y;
    });

    CodingUnit unit;
    unit.t = t;
    unit.coords.reserve(order.size());
    unit.polarities.reserve(order.size());
    for (std::size_t k : order) {
      const Event& e = events[k];
      if (e.p != 1 && e.p != -1) {
        throw std::invalid_argument("polarity must be +1 or -1");
      }
      if (e.x >= geometry.width || e.y >= geometry.height) {
        throw BoundsError("event (" + std::to_string(e.x) + ", " +
                          std::to_string(e.y) + ") outside geometry");
      }
      if (!unit.coords.empty() && unit.coords.back() == Coord{e.x, e.y}) {
        if (unit.polarities.back() == e.p) {
          ++result.duplicates_dropped;
          continue;
        }
        throw DuplicateEventError("conflicting polarity at t=" + std::to_string(t) +
                                  " (" + std::to_string(e.x) + ", " +
                                  std::to_string(e.y) + ")");
      }
      unit.coords.push_back({e.x, e.y});
      unit.polarities.push_back(e.p);
    }

    result.units.push_back(std::move(unit));
    prev_t = t;
    i = j;
  }
  return result;
}

std::vector<std::uint8_t> polarity_bits(const CodingUnit& unit) {
  if (unit.coords.empty() || unit.coords.size() != unit.polarities.size()) {
    throw std::invalid_argument("coding unit must hold >= 1 aligned event");
  }
  std::vector<std::uint8_t> bits(unit.polarities.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    bits[i] = unit.polarities[i] == 1 ? 1 : 0;
  }
  return bits;
}

SensorGeometry infer_geometry(std::span<const Event> events) {
  std::uint32_t w = 1, h = 1;
  for (const Event& e : events) {
    w = std::max<std::uint32_t>(w, std::uint32_t(e.x) + 1);
    h = std::max<std::uint32_t>(h, std::uint32_t(e.y) + 1);
  }
  return SensorGeometry{w, h};
}

}  // namespace evlc
