// SPDX-License-Identifier: Apache-2.0
#include "dynasc/pgm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dynasc/errors.hpp"

namespace dynasc {

CameraImage decode_pgm(const std::string& bytes) {
  if (bytes.size() < 2) throw PgmParseError("file too short for magic", 0);
  if (bytes[0] != 'P' || bytes[1] != '5') {
    throw PgmParseError("unsupported magic \"" + bytes.substr(0, 2) + "\" (want P5)", 0);
  }
  std::size_t pos = 2;

  auto skip_ws = [&]() {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v') {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto parse_uint = [&](const char* field) -> long {
    skip_ws();
    if (pos >= bytes.size()) {
      throw PgmParseError(std::string("unexpected end of header before ") + field, pos);
    }
    if (bytes[pos] < '0' || bytes[pos] > '9') {
      throw PgmParseError(std::string("expected digit in ") + field, pos);
    }
    long value = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1'000'000'000L) throw PgmParseError(std::string(field) + " out of range", pos);
      ++pos;
    }
    return value;
  };

  const long width = parse_uint("width");
  const long height = parse_uint("height");
  const long maxval = parse_uint("maxval");
  if (width <= 0 || height <= 0) throw PgmParseError("non-positive dimensions", pos);
  if (maxval != 255) throw PgmParseError("unsupported maxval (want 255)", pos);

  // Exactly one whitespace byte separates the header from the raster.
  if (pos >= bytes.size()) throw PgmParseError("missing raster separator", pos);
  const char sep = bytes[pos];
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n') {
    throw PgmParseError("expected whitespace before raster", pos);
  }
  ++pos;

  const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - pos < need) throw PgmParseError("raster truncated", bytes.size());

  CameraImage image;
  image.width = static_cast<int>(width);
  image.height = static_cast<int>(height);
  image.pixels.resize(need);
  for (std::size_t i = 0; i < need; ++i) {
    image.pixels[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
  }
  return image;
}

std::string encode_pgm(const CameraImage& image) {
  char header[64];
  std::snprintf(header, sizeof(header), "P5\n%d %d\n255\n", image.width, image.height);
  std::string out = header;
  out.reserve(out.size() + image.pixels.size());
  for (const double v : image.pixels) {
    const double clamped = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0))));
  }
  return out;
}

CameraImage load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_pgm: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_pgm(buf.str());
}

void save_pgm(const CameraImage& image, const std::string& path) {
  const std::string bytes = encode_pgm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_pgm: cannot open " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("save_pgm: write failed for " + path);
}

}  // namespace dynasc
