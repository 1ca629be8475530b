#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bwn/errors.hpp"

namespace bwn {

/// A parsed IDX container (unsigned-byte payload).
struct IdxData {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

/// Strict big-endian IDX parse: bytes 0-1 must be zero, byte 2 the type code
/// (only 0x08, unsigned byte, is supported), byte 3 the dimension count,
/// then one big-endian uint32 per dimension, then the payload. Trailing
/// bytes are rejected. Errors carry the offending byte offset.
IdxData parse_idx(const std::uint8_t* bytes, std::size_t len);
IdxData parse_idx(const std::vector<std::uint8_t>& bytes);

/// Inverse of parse_idx; bit-exact round trip.
std::vector<std::uint8_t> serialize_idx(const IdxData& idx);

/// Reads a file; gzip streams are detected by their magic bytes and
/// decompressed transparently.
std::vector<std::uint8_t> read_file_maybe_gzip(const std::string& path);

IdxData load_idx_file(const std::string& path);

}  // namespace bwn
