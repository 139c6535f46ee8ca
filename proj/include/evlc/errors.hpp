#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evlc {

// Base class for every error raised by the codec.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input record; `offset` is the byte position where parsing failed.
struct ParseError : Error {
  ParseError(const std::string& what, std::size_t offset_)
      : Error(what + " (byte offset " + std::to_string(offset_) + ")"),
        offset(offset_) {}
  std::size_t offset;
};

// Event timestamps decreased within an input stream.
struct OrderingError : Error {
  using Error::Error;
};

// Coordinate outside the sensor geometry or the quadtree square.
struct BoundsError : Error {
  using Error::Error;
};

// Two events at the same (t, x, y) with conflicting polarity.
struct DuplicateEventError : Error {
  using Error::Error;
};

// Bitstream payload is inconsistent, truncated, or padded incorrectly.
struct CorruptionError : Error {
  using Error::Error;
};

// Container-level problem: bad magic, bad header field, trailing garbage.
struct FormatError : Error {
  using Error::Error;
};

// Weights file damage or an encoder/decoder model mismatch.
struct ModelError : Error {
  using Error::Error;
};

struct TrainingError : Error {
  TrainingError(const std::string& what, int epoch_)
      : Error(what + " (epoch " + std::to_string(epoch_) + ")"), epoch(epoch_) {}
  int epoch;
};

}  // namespace evlc
