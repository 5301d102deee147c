// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "dynasc/image.hpp"

namespace dynasc {

// Binary PGM (magic "P5", maxval 255). Intensities map linearly between
// [0, 1] and [0, 255] with round-to-nearest on save.
//
// Parse failures throw PgmParseError carrying the byte offset of the first
// unusable byte; any other magic (including ASCII "P2") is rejected as
// unsupported.
CameraImage load_pgm(const std::string& path);
void save_pgm(const CameraImage& image, const std::string& path);

// In-memory forms used by the file functions and by tests.
CameraImage decode_pgm(const std::string& bytes);
std::string encode_pgm(const CameraImage& image);

}  // namespace dynasc
