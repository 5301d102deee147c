// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace dynasc {

// One flag per token position; 1 = kept.
using KeepMask = std::vector<std::uint8_t>;

// Uniform 8-bit quantizer over [-1, 1]. Values outside the interval clamp.
inline std::uint8_t quantize_value(double v) {
  const double c = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<std::uint8_t>(std::lround((c + 1.0) * 0.5 * 255.0));
}

inline double dequantize_value(std::uint8_t code) {
  return 2.0 * static_cast<double>(code) / 255.0 - 1.0;
}

// Wire form of an encoded frame: the keep mask (always delivered intact on
// a protected side channel) plus one 8-bit code per retained token
// dimension, in ascending token-index order. When quantization is disabled
// the same values travel as raw doubles and bit accounting is undefined.
struct QuantizedPayload {
  int token_len = 0;
  KeepMask keep_mask;
  std::vector<std::uint8_t> codes;  // kept_count() * token_len when quantized
  std::vector<double> raw;          // kept_count() * token_len when !quantized
  bool quantized = true;

  int kept_count() const {
    int n = 0;
    for (const std::uint8_t k : keep_mask) n += k ? 1 : 0;
    return n;
  }

  // Z(s_t) = N + 8 * L_s * kept: mask bits plus quantized token payload.
  std::size_t bit_size() const {
    return keep_mask.size() +
           8ull * static_cast<std::size_t>(token_len) * static_cast<std::size_t>(kept_count());
  }
};

}  // namespace dynasc
