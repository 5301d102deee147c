// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dynasc/errors.hpp"

namespace dynasc {

// Packed bit buffer, MSB-first within each byte (bit 0 of the stream is the
// most significant bit of bytes[0]).
struct BitStream {
  std::vector<std::uint8_t> bytes;
  std::size_t bit_count = 0;

  void append_bits(std::uint32_t value, int nbits) {
    for (int k = nbits - 1; k >= 0; --k) {
      const std::size_t i = bit_count++;
      if (i / 8 >= bytes.size()) bytes.push_back(0);
      if ((value >> k) & 1u) bytes[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    }
  }

  std::uint32_t read_bits(std::size_t pos, int nbits) const {
    if (pos + static_cast<std::size_t>(nbits) > bit_count) {
      throw CorruptPayload("bitstream: read past end");
    }
    std::uint32_t value = 0;
    for (int k = 0; k < nbits; ++k) {
      const std::size_t i = pos + static_cast<std::size_t>(k);
      const bool bit = (bytes[i / 8] >> (7 - i % 8)) & 1u;
      value = (value << 1) | static_cast<std::uint32_t>(bit);
    }
    return value;
  }

  bool get(std::size_t i) const { return (bytes[i / 8] >> (7 - i % 8)) & 1u; }

  void flip(std::size_t i) { bytes[i / 8] ^= static_cast<std::uint8_t>(0x80u >> (i % 8)); }
};

}  // namespace dynasc
