#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bwn {

/// Invalid shapes, invalid plans, invalid configs.
class config_error : public std::runtime_error {
public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad input data (out-of-range labels, degenerate batches, ...).
class data_error : public std::runtime_error {
public:
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// API misuse (e.g. backward before forward).
class usage_error : public std::logic_error {
public:
  explicit usage_error(const std::string& msg) : std::logic_error(msg) {}
};

/// Malformed byte stream; carries the offset of the first bad byte.
class parse_error : public std::runtime_error {
public:
  parse_error(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

}  // namespace bwn
