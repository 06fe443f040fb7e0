#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace svit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not agree (matmul inner dims, conv output size, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or unsupported kernel configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyMemoryError : public Error {
 public:
  using Error::Error;
};

// Memory pool insertion with a non-increasing frame index.
class OrderingError : public Error {
 public:
  using Error::Error;
};

// Malformed binary or text file. `offset` is the byte (or line) position
// where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace svit
