// SPDX-License-Identifier: Apache-2.0
#include "dynasc/baseline.hpp"

#include <cmath>
#include <stdexcept>

namespace dynasc {
namespace {

struct DctTables {
  double basis[8][8];   // basis[u][n] = alpha_u * cos(pi (2n+1) u / 16)
  double bound1d[8];    // alpha_u * sum_n |cos(...)|
  DctTables() {
    const double pi = 3.14159265358979323846;
    for (int u = 0; u < 8; ++u) {
      const double alpha = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      double l1 = 0.0;
      for (int n = 0; n < 8; ++n) {
        basis[u][n] = alpha * std::cos(pi * (2 * n + 1) * u / 16.0);
        l1 += std::abs(basis[u][n]);
      }
      bound1d[u] = l1;
    }
  }
};

const DctTables& tables() {
  static const DctTables t;
  return t;
}

}  // namespace

void dct8x8(const double* block, double* coeffs) {
  const auto& t = tables();
  double tmp[64];
  // Rows.
  for (int y = 0; y < 8; ++y) {
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int n = 0; n < 8; ++n) acc += t.basis[u][n] * block[y * 8 + n];
      tmp[y * 8 + u] = acc;
    }
  }
  // Columns.
  for (int u = 0; u < 8; ++u) {
    for (int v = 0; v < 8; ++v) {
      double acc = 0.0;
      for (int n = 0; n < 8; ++n) acc += t.basis[v][n] * tmp[n * 8 + u];
      coeffs[v * 8 + u] = acc;
    }
  }
}

void idct8x8(const double* coeffs, double* block) {
  const auto& t = tables();
  double tmp[64];
  for (int u = 0; u < 8; ++u) {
    for (int n = 0; n < 8; ++n) {
      double acc = 0.0;
      for (int v = 0; v < 8; ++v) acc += t.basis[v][n] * coeffs[v * 8 + u];
      tmp[n * 8 + u] = acc;
    }
  }
  for (int y = 0; y < 8; ++y) {
    for (int n = 0; n < 8; ++n) {
      double acc = 0.0;
      for (int u = 0; u < 8; ++u) acc += t.basis[u][n] * tmp[y * 8 + u];
      block[y * 8 + n] = acc;
    }
  }
}

double dct_coeff_bound(int u, int v) {
  const auto& t = tables();
  return 0.5 * t.bound1d[u] * t.bound1d[v];
}

std::uint16_t dct_quantize(double scaled, int q_bits) {
  const int levels = (1 << q_bits) - 1;
  double s = scaled < -1.0 ? -1.0 : (scaled > 1.0 ? 1.0 : scaled);
  const long idx = std::lround((s + 1.0) * 0.5 * (levels - 1));
  return static_cast<std::uint16_t>(idx < 0 ? 0 : (idx > levels - 1 ? levels - 1 : idx));
}

double dct_dequantize(std::uint16_t code, int q_bits) {
  const int levels = (1 << q_bits) - 1;
  return -1.0 + 2.0 * static_cast<double>(code) / static_cast<double>(levels - 1);
}

DctBlockStream dct_encode(const CameraImage& image, int q_bits) {
  if (q_bits < 2 || q_bits > 8) {
    throw std::invalid_argument("dct_encode: q_bits must be in [2, 8]");
  }
  if (image.width % 8 != 0 || image.height % 8 != 0 || image.width <= 0 || image.height <= 0) {
    throw std::invalid_argument("dct_encode: image sides must be multiples of 8");
  }
  DctBlockStream stream;
  stream.q_bits = q_bits;
  stream.grid_w = image.width / 8;
  stream.grid_h = image.height / 8;
  stream.codes.resize(static_cast<std::size_t>(stream.n_blocks()) * 64);

  double block[64];
  double coeffs[64];
  for (int by = 0; by < stream.grid_h; ++by) {
    for (int bx = 0; bx < stream.grid_w; ++bx) {
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          // Center pixels so every coefficient bound is symmetric.
          block[y * 8 + x] = image.at(bx * 8 + x, by * 8 + y) - 0.5;
        }
      }
      dct8x8(block, coeffs);
      const std::size_t base =
          (static_cast<std::size_t>(by) * stream.grid_w + bx) * 64;
      for (int v = 0; v < 8; ++v) {
        for (int u = 0; u < 8; ++u) {
          const double scaled = coeffs[v * 8 + u] / dct_coeff_bound(u, v);
          stream.codes[base + v * 8 + u] = dct_quantize(scaled, q_bits);
        }
      }
    }
  }
  return stream;
}

CameraImage dct_decode(const DctBlockStream& stream) {
  if (stream.codes.size() != static_cast<std::size_t>(stream.n_blocks()) * 64) {
    throw CorruptPayload("dct_decode: code count does not match block grid");
  }
  CameraImage image;
  image.width = stream.grid_w * 8;
  image.height = stream.grid_h * 8;
  image.pixels.resize(static_cast<std::size_t>(image.width) * image.height);

  double block[64];
  double coeffs[64];
  for (int by = 0; by < stream.grid_h; ++by) {
    for (int bx = 0; bx < stream.grid_w; ++bx) {
      const std::size_t base =
          (static_cast<std::size_t>(by) * stream.grid_w + bx) * 64;
      for (int v = 0; v < 8; ++v) {
        for (int u = 0; u < 8; ++u) {
          const double scaled = dct_dequantize(stream.codes[base + v * 8 + u], stream.q_bits);
          coeffs[v * 8 + u] = scaled * dct_coeff_bound(u, v);
        }
      }
      idct8x8(coeffs, block);
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          const double v = block[y * 8 + x] + 0.5;
          image.at(bx * 8 + x, by * 8 + y) = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        }
      }
    }
  }
  return image;
}

BitStream dct_serialize(const DctBlockStream& stream) {
  BitStream bits;
  bits.bytes.reserve(3 + (stream.bit_size() + 7) / 8);
  bits.append_bits(static_cast<std::uint32_t>(stream.q_bits), 8);
  bits.append_bits(static_cast<std::uint32_t>(stream.n_blocks()), 16);
  for (const std::uint16_t code : stream.codes) {
    bits.append_bits(code, stream.q_bits);
  }
  return bits;
}

DctBlockStream dct_parse(const BitStream& bits) {
  if (bits.bit_count < 24) throw CorruptPayload("dct_parse: header truncated");
  const int q_bits = static_cast<int>(bits.read_bits(0, 8));
  const int n_blocks = static_cast<int>(bits.read_bits(8, 16));
  if (q_bits < 2 || q_bits > 8) throw CorruptPayload("dct_parse: bad q_bits");
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_blocks))));
  if (n_blocks <= 0 || side * side != n_blocks) {
    throw CorruptPayload("dct_parse: block count is not a square grid");
  }
  const std::size_t want =
      24 + static_cast<std::size_t>(n_blocks) * 64 * static_cast<std::size_t>(q_bits);
  if (bits.bit_count != want) throw CorruptPayload("dct_parse: payload length mismatch");

  DctBlockStream stream;
  stream.q_bits = q_bits;
  stream.grid_w = side;
  stream.grid_h = side;
  stream.codes.resize(static_cast<std::size_t>(n_blocks) * 64);
  std::size_t pos = 24;
  const int levels = (1 << q_bits) - 1;
  for (auto& code : stream.codes) {
    std::uint32_t raw = bits.read_bits(pos, q_bits);
    // A flipped high bit can exceed the top level; clamp into range.
    if (raw > static_cast<std::uint32_t>(levels - 1)) raw = static_cast<std::uint32_t>(levels - 1);
    code = static_cast<std::uint16_t>(raw);
    pos += static_cast<std::size_t>(q_bits);
  }
  return stream;
}

}  // namespace dynasc
