#include "bwn/idx.hpp"

#include <zlib.h>

#include <cstdio>
#include <memory>

namespace bwn {

IdxData parse_idx(const std::uint8_t* bytes, std::size_t len) {
  if (len < 4) throw parse_error("idx: header truncated, need at least 4 bytes", len);
  if (bytes[0] != 0) throw parse_error("idx: bad magic, byte 0 must be zero", 0);
  if (bytes[1] != 0) throw parse_error("idx: bad magic, byte 1 must be zero", 1);
  if (bytes[2] != 0x08)
    throw parse_error("idx: unsupported type code 0x" + [](unsigned v) {
      char buf[8];
      std::snprintf(buf, sizeof buf, "%02x", v);
      return std::string(buf);
    }(bytes[2]) + " (only 0x08 unsigned byte is supported)", 2);
  const std::size_t ndims = bytes[3];
  const std::size_t header_len = 4 + 4 * ndims;
  if (len < header_len)
    throw parse_error("idx: truncated dimension table, expected " + std::to_string(header_len) +
                          " header bytes",
                      len);
  IdxData idx;
  idx.dims.resize(ndims);
  std::size_t count = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    const std::size_t off = 4 + 4 * d;
    idx.dims[d] = (std::uint32_t(bytes[off]) << 24) | (std::uint32_t(bytes[off + 1]) << 16) |
                  (std::uint32_t(bytes[off + 2]) << 8) | std::uint32_t(bytes[off + 3]);
    count *= idx.dims[d];
  }
  const std::size_t expected = header_len + count;
  if (len < expected)
    throw parse_error("idx: payload truncated, expected " + std::to_string(count) +
                          " data bytes but the stream ends",
                      len);
  if (len > expected)
    throw parse_error("idx: trailing bytes after payload", expected);
  idx.payload.assign(bytes + header_len, bytes + expected);
  return idx;
}

IdxData parse_idx(const std::vector<std::uint8_t>& bytes) {
  return parse_idx(bytes.data(), bytes.size());
}

std::vector<std::uint8_t> serialize_idx(const IdxData& idx) {
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * idx.dims.size() + idx.payload.size());
  out.push_back(0);
  out.push_back(0);
  out.push_back(0x08);
  out.push_back(static_cast<std::uint8_t>(idx.dims.size()));
  for (std::uint32_t d : idx.dims) {
    out.push_back(static_cast<std::uint8_t>(d >> 24));
    out.push_back(static_cast<std::uint8_t>(d >> 16));
    out.push_back(static_cast<std::uint8_t>(d >> 8));
    out.push_back(static_cast<std::uint8_t>(d));
  }
  out.insert(out.end(), idx.payload.begin(), idx.payload.end());
  return out;
}

namespace {

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in) {
  z_stream zs{};
  // 16 + MAX_WBITS: gzip container
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
    throw std::runtime_error("gzip: inflateInit2 failed");
  std::unique_ptr<z_stream, int (*)(z_stream*)> guard(&zs, inflateEnd);
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = buf;
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END)
      throw parse_error("gzip: corrupt stream (zlib rc " + std::to_string(rc) + ")",
                        static_cast<std::size_t>(zs.total_in));
    out.insert(out.end(), buf, buf + (sizeof buf - zs.avail_out));
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> read_file_maybe_gzip(const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "rb"), std::fclose);
  if (!f) throw data_error("cannot open file: " + path);
  std::vector<std::uint8_t> bytes;
  std::uint8_t buf[1 << 16];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f.get())) > 0) bytes.insert(bytes.end(), buf, buf + n);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return gunzip(bytes);
  return bytes;
}

IdxData load_idx_file(const std::string& path) {
  try {
    return parse_idx(read_file_maybe_gzip(path));
  } catch (const parse_error& e) {
    throw parse_error(path + ": " + e.what(), e.offset());
  }
}

}  // namespace bwn
