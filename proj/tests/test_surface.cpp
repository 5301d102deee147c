// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "dynasc/errors.hpp"
#include "dynasc/image.hpp"
#include "dynasc/pgm.hpp"
#include "dynasc/surface.hpp"

using namespace dynasc;

namespace {

// Pearson correlation between two equally sized images.
double pearson(const CameraImage& a, const CameraImage& b) {
  const std::size_t n = a.pixels.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a.pixels[i];
    mb += b.pixels[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a.pixels[i] - ma;
    const double db = b.pixels[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return sab / std::sqrt(saa * sbb);
}

// Center crop to half side, bilinearly upsampled back to the full side.
CameraImage center_crop_upsampled(const CameraImage& img) {
  const int side = img.width;
  CameraImage out;
  out.width = side;
  out.height = side;
  out.pixels.resize(img.pixels.size());
  for (int j = 0; j < side; ++j) {
    // Continuous source coordinate inside the central half window.
    const double sy = side / 4.0 + (j + 0.5) * 0.5 - 0.5;
    const int y0 = static_cast<int>(std::floor(sy));
    const double fy = sy - y0;
    for (int i = 0; i < side; ++i) {
      const double sx = side / 4.0 + (i + 0.5) * 0.5 - 0.5;
      const int x0 = static_cast<int>(std::floor(sx));
      const double fx = sx - x0;
      auto px = [&](int x, int y) {
        x = std::clamp(x, 0, side - 1);
        y = std::clamp(y, 0, side - 1);
        return img.at(x, y);
      };
      const double top = px(x0, y0) + (px(x0 + 1, y0) - px(x0, y0)) * fx;
      const double bot = px(x0, y0 + 1) + (px(x0 + 1, y0 + 1) - px(x0, y0 + 1)) * fx;
      out.at(i, j) = top + (bot - top) * fy;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("generate_surface determinism and seed separation") {
  const SurfaceMap a = generate_surface(7, 12, 6000.0, 2000.0);
  const SurfaceMap b = generate_surface(7, 12, 6000.0, 2000.0);
  REQUIRE(a.albedo.size() == b.albedo.size());
  CHECK(a.albedo == b.albedo);  // bit-identical
  CHECK(a.target_cell == b.target_cell);

  const SurfaceMap c = generate_surface(8, 12, 6000.0, 2000.0);
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.albedo.size(); ++i) {
    if (a.albedo[i] != c.albedo[i]) ++diff;
  }
  const double frac = static_cast<double>(diff) / static_cast<double>(a.albedo.size());
  CHECK(frac >= 0.01);
}

TEST_CASE("generate_surface zero craters gives a plain noise field in range") {
  const SurfaceMap m = generate_surface(1, 0, 6000.0, 2000.0);
  CHECK(m.tex_w == 3000);
  CHECK(m.tex_h == 1000);
  float lo = 1.0f, hi = 0.0f;
  for (const float v : m.albedo) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= 0.0f);
  CHECK(hi <= 1.0f);
  CHECK(hi - lo > 0.05f);  // noise actually varies
  CHECK(m.target_cell.col >= 0);
  CHECK(m.target_cell.col < m.cells_x);
  CHECK(m.target_cell.row >= 0);
  CHECK(m.target_cell.row < m.cells_y);
}

TEST_CASE("generate_surface rejects bad arguments") {
  CHECK_THROWS_AS(generate_surface(1, 0, 0.0, 2000.0), std::invalid_argument);
  CHECK_THROWS_AS(generate_surface(1, 0, 6000.0, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(generate_surface(1, -3, 6000.0, 2000.0), std::invalid_argument);
}

TEST_CASE("render_observation geometry and determinism") {
  const SurfaceMap m = generate_surface(21, 40, 6000.0, 2000.0);
  const auto [cx, cy] = m.cell_center(m.target_cell);

  const CameraImage img = render_observation(m, Vec3{cx, cy, 500.0}, 200.0);
  CHECK(img.width == 64);
  CHECK(img.height == 64);
  CHECK(img.origin_cell == m.target_cell);
  for (const double v : img.pixels) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  const CameraImage again = render_observation(m, Vec3{cx, cy, 500.0}, 200.0);
  CHECK(img.pixels == again.pixels);
}

TEST_CASE("render_observation halved footprint magnifies the center") {
  const SurfaceMap m = generate_surface(3, 60, 6000.0, 2000.0);
  const Vec3 high{2800.0, 1100.0, 800.0};
  const Vec3 low{2800.0, 1100.0, 400.0};
  // Pinhole model: footprint scales with altitude.
  const CameraImage wide = render_observation(m, high, 400.0);
  const CameraImage narrow = render_observation(m, low, 200.0);
  const CameraImage crop = center_crop_upsampled(wide);
  CHECK(pearson(narrow, crop) > 0.9);
}

TEST_CASE("render_observation shifts origin_cell with lander motion") {
  const SurfaceMap m = generate_surface(5, 10, 6000.0, 2000.0);
  const Vec3 p{(4 + 0.5) * m.cell_w_m(), (3 + 0.5) * m.cell_h_m(), 300.0};
  const CameraImage a = render_observation(m, p, 150.0);
  const CameraImage b =
      render_observation(m, Vec3{p.x + m.cell_w_m(), p.y, p.z}, 150.0);
  CHECK(b.origin_cell.col == a.origin_cell.col + 1);
  CHECK(b.origin_cell.row == a.origin_cell.row);
}

TEST_CASE("render_observation validates inputs") {
  const SurfaceMap m = generate_surface(2, 5, 6000.0, 2000.0);
  CHECK_THROWS_AS(render_observation(m, Vec3{100.0, 100.0, 0.0}, 100.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(render_observation(m, Vec3{100.0, 100.0, -5.0}, 100.0),
                  std::invalid_argument);
  // Footprint entirely off the surface on +x.
  CHECK_THROWS_AS(render_observation(m, Vec3{6200.0, 100.0, 100.0}, 100.0),
                  std::out_of_range);
  // Touching the edge is still renderable.
  CHECK_NOTHROW(render_observation(m, Vec3{6040.0, 100.0, 100.0}, 100.0));
}

TEST_CASE("split and merge round trip") {
  const SurfaceMap m = generate_surface(9, 25, 6000.0, 2000.0);
  const CameraImage img = render_observation(m, Vec3{1500.0, 900.0, 400.0}, 200.0);

  const PatchGrid grid = split_patches(img, 8);
  CHECK(grid.count() == 64);
  CHECK(grid.patch_dim() == 64);
  CHECK(grid.grid_w == 8);
  CHECK(grid.grid_h == 8);

  const CameraImage back = merge_patches(grid);
  REQUIRE(back.pixels.size() == img.pixels.size());
  double max_diff = 0.0;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(img.pixels[i] - back.pixels[i]));
  }
  CHECK(max_diff == 0.0);

  CHECK_THROWS_AS(split_patches(img, 7), std::invalid_argument);
}

TEST_CASE("patch layout is row major") {
  CameraImage img;
  img.width = 16;
  img.height = 16;
  img.pixels.resize(256);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) img.at(x, y) = (y * 16 + x) / 255.0;
  }
  const PatchGrid g = split_patches(img, 8);
  // Patch 1 is the top-right tile; its first pixel is image (8, 0).
  CHECK(g.patch(1)[0] == doctest::Approx(8.0 / 255.0).epsilon(1e-12));
  // Within-patch pixels are row-major.
  CHECK(g.patch(0)[8 + 3] == doctest::Approx((16 + 3) / 255.0).epsilon(1e-12));
}

TEST_CASE("pgm round trip and validation") {
  SUBCASE("all-zero image decodes to zeros") {
    std::string bytes = "P5\n64 64\n255\n";
    bytes.append(64 * 64, '\0');
    const CameraImage img = decode_pgm(bytes);
    CHECK(img.width == 64);
    CHECK(img.height == 64);
    for (const double v : img.pixels) CHECK(v == 0.0);
  }

  SUBCASE("save then load stays within one quantization step") {
    const SurfaceMap m = generate_surface(11, 30, 6000.0, 2000.0);
    const CameraImage img = render_observation(m, Vec3{2000.0, 1000.0, 300.0}, 200.0);
    const CameraImage back = decode_pgm(encode_pgm(img));
    double max_diff = 0.0;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      max_diff = std::max(max_diff, std::abs(img.pixels[i] - back.pixels[i]));
    }
    CHECK(max_diff <= 1.0 / 255.0 + 1e-12);
  }

  SUBCASE("P2 magic is rejected as unsupported") {
    const std::string bytes = "P2\n4 4\n255\n0 0 0 0";
    try {
      decode_pgm(bytes);
      FAIL("expected PgmParseError");
    } catch (const PgmParseError& e) {
      CHECK(std::string(e.what()).find("unsupported magic") != std::string::npos);
      CHECK(e.byte_offset() == 0);
    }
  }

  SUBCASE("truncated raster reports the failing offset") {
    std::string bytes = "P5\n8 8\n255\n";
    bytes.append(10, '\x40');  // 64 bytes needed
    try {
      decode_pgm(bytes);
      FAIL("expected PgmParseError");
    } catch (const PgmParseError& e) {
      CHECK(e.byte_offset() == bytes.size());
    }
  }

  SUBCASE("non-255 maxval is rejected") {
    CHECK_THROWS_AS(decode_pgm(std::string("P5\n4 4\n65535\n") + std::string(32, '\0')),
                    PgmParseError);
  }

  SUBCASE("header comments are skipped") {
    std::string bytes = "P5\n# synthetic frame\n4 2\n255\n";
    bytes.append(8, '\x80');
    const CameraImage img = decode_pgm(bytes);
    CHECK(img.width == 4);
    CHECK(img.height == 2);
    CHECK(img.pixels[0] == doctest::Approx(128.0 / 255.0));
  }
}
