// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dynasc {

// Malformed or unsupported PGM input. byte_offset points at the first byte
// that could not be consumed.
class PgmParseError : public std::runtime_error {
 public:
  PgmParseError(const std::string& what, std::size_t byte_offset)
      : std::runtime_error(what + " (byte " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// Bad scenario config: unknown key, missing key, wrong type, bad value.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numeric routine failed to reach its required tolerance (quadrature
// depth exhausted, non-finite intermediate, ...). CLI exit code 3.
class NumericError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Received payload violates the bitstream contract (truncated stream,
// inconsistent header, mask/code length mismatch).
class CorruptPayload : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dynasc
