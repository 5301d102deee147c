// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dynasc/codec.hpp"

namespace dynasc {

// Parameter container, little-endian throughout:
//   magic "DSC1"
//   u32 patch_side, token_len, stages, pred_hidden
//   u32 tensor count, then per tensor in declaration order:
//     u8 name length, name bytes, u32 rows, u32 cols, rows*cols float64
// Loading validates the magic, the shape table against the declared dims
// and the exact byte length; any mismatch throws CorruptPayload.
std::vector<std::uint8_t> serialize_params(const CodecParams& params);
CodecParams parse_params(const std::vector<std::uint8_t>& bytes);

void save_params(const CodecParams& params, const std::string& path);
CodecParams load_params(const std::string& path);

}  // namespace dynasc
