// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "dynasc/bitstream.hpp"
#include "dynasc/image.hpp"

namespace dynasc {

// Fixed-rate transform codec: per 8x8 block, an orthonormal 2-D DCT whose
// coefficients are scaled into [-1, 1] by per-position worst-case bounds and
// uniformly quantized. No entropy coding, so the payload size is exactly
// n_blocks * 64 * q_bits regardless of content.
struct DctBlockStream {
  int q_bits = 8;
  int grid_w = 0;  // block columns
  int grid_h = 0;  // block rows
  std::vector<std::uint16_t> codes;  // n_blocks * 64, each < 2^q_bits

  int n_blocks() const { return grid_w * grid_h; }
  std::size_t bit_size() const {
    return static_cast<std::size_t>(n_blocks()) * 64 * static_cast<std::size_t>(q_bits);
  }
};

// Forward/inverse orthonormal 2-D DCT on one 8x8 block (row-major, 64
// values). inverse(forward(x)) = x to floating-point accuracy.
void dct8x8(const double* block, double* coeffs);
void idct8x8(const double* coeffs, double* block);

// Worst-case |coefficient| for pixels centered into [-0.5, 0.5]; scaling by
// this bound maps every coefficient into [-1, 1].
double dct_coeff_bound(int u, int v);

// Midtread uniform quantizer over [-1, 1] with 2^q - 1 levels; level
// (2^q - 2) / 2 represents exactly zero.
std::uint16_t dct_quantize(double scaled, int q_bits);
double dct_dequantize(std::uint16_t code, int q_bits);

// Throws std::invalid_argument unless q_bits is in [2, 8] and both image
// sides are multiples of 8.
DctBlockStream dct_encode(const CameraImage& image, int q_bits);

// Dequantize, inverse transform, clamp to [0, 1]. Bit errors are decoded
// as-is; there is no concealment.
CameraImage dct_decode(const DctBlockStream& stream);

// Wire format: header {q_bits: u8, n_blocks: u16 big-endian}, then the
// coefficient codes packed big-endian at q_bits each. The header is
// bookkeeping; rate accounting uses DctBlockStream::bit_size().
BitStream dct_serialize(const DctBlockStream& stream);

// Throws CorruptPayload on truncation or a header/length mismatch.
DctBlockStream dct_parse(const BitStream& bits);

}  // namespace dynasc
