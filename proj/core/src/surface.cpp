// SPDX-License-Identifier: Apache-2.0
#include "dynasc/surface.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dynasc/rng.hpp"

namespace dynasc {
namespace {

// Lattice value in [-1, 1] for one noise octave; pure hash so the texture
// can be evaluated at any point without storing lattices.
double lattice_value(std::uint64_t seed, int octave, std::int64_t ix, std::int64_t iy) {
  std::uint64_t s = seed ^ (0xd1342543de82ef95ULL * static_cast<std::uint64_t>(octave + 1));
  s ^= 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(ix + 0x10000);
  s ^= 0xc2b2ae3d27d4eb4fULL * static_cast<std::uint64_t>(iy + 0x10000);
  const std::uint64_t h = splitmix64(s);
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(std::uint64_t seed, int octave, double tx, double ty, int spacing) {
  const double u = tx / spacing;
  const double v = ty / spacing;
  const std::int64_t ix = static_cast<std::int64_t>(std::floor(u));
  const std::int64_t iy = static_cast<std::int64_t>(std::floor(v));
  const double fu = smoothstep(u - static_cast<double>(ix));
  const double fv = smoothstep(v - static_cast<double>(iy));
  const double v00 = lattice_value(seed, octave, ix, iy);
  const double v10 = lattice_value(seed, octave, ix + 1, iy);
  const double v01 = lattice_value(seed, octave, ix, iy + 1);
  const double v11 = lattice_value(seed, octave, ix + 1, iy + 1);
  const double top = v00 + (v10 - v00) * fu;
  const double bot = v01 + (v11 - v01) * fu;
  return top + (bot - top) * fv;
}

}  // namespace

Cell SurfaceMap::cell_at(double x, double y) const {
  const double cx = std::clamp(x, 0.0, width_m);
  const double cy = std::clamp(y, 0.0, height_m);
  int col = static_cast<int>(std::floor(cx / cell_w_m()));
  int row = static_cast<int>(std::floor(cy / cell_h_m()));
  col = std::clamp(col, 0, cells_x - 1);
  row = std::clamp(row, 0, cells_y - 1);
  return Cell{col, row};
}

std::pair<double, double> SurfaceMap::cell_center(Cell c) const {
  return {(c.col + 0.5) * cell_w_m(), (c.row + 0.5) * cell_h_m()};
}

SurfaceMap generate_surface(std::uint64_t seed, int crater_count, double width_m,
                            double height_m, const SurfaceParams& params) {
  if (width_m <= 0.0 || height_m <= 0.0) {
    throw std::invalid_argument("generate_surface: dimensions must be positive");
  }
  if (crater_count < 0) {
    throw std::invalid_argument("generate_surface: crater_count must be >= 0");
  }
  if (params.octave_spacing.size() != params.octave_amp.size()) {
    throw std::invalid_argument("generate_surface: octave spacing/amp size mismatch");
  }

  SurfaceMap map;
  map.width_m = width_m;
  map.height_m = height_m;
  map.texel_m = params.texel_m;
  map.tex_w = std::max(1, static_cast<int>(std::lround(width_m / params.texel_m)));
  map.tex_h = std::max(1, static_cast<int>(std::lround(height_m / params.texel_m)));
  map.albedo.resize(static_cast<std::size_t>(map.tex_w) * map.tex_h);

  for (int ty = 0; ty < map.tex_h; ++ty) {
    for (int tx = 0; tx < map.tex_w; ++tx) {
      double v = params.base_albedo;
      for (std::size_t o = 0; o < params.octave_spacing.size(); ++o) {
        v += params.octave_amp[o] *
             value_noise(seed, static_cast<int>(o), tx + 0.5, ty + 0.5,
                         params.octave_spacing[o]);
      }
      map.albedo[static_cast<std::size_t>(ty) * map.tex_w + tx] =
          static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }

  // Craters: depressions with a raised-cosine radial profile, applied in
  // draw order so overlaps deepen deterministically.
  Rng rng(Rng::derive(seed, 0xc7a7e5ULL));
  for (int c = 0; c < crater_count; ++c) {
    const double cx = rng.uniform(0.0, width_m);
    const double cy = rng.uniform(0.0, height_m);
    const double radius = rng.uniform(params.crater_radius_min_m, params.crater_radius_max_m);
    const double depth = rng.uniform(params.crater_depth_min, params.crater_depth_max);
    const int tx0 = std::max(0, static_cast<int>(std::floor((cx - radius) / params.texel_m)));
    const int tx1 =
        std::min(map.tex_w - 1, static_cast<int>(std::ceil((cx + radius) / params.texel_m)));
    const int ty0 = std::max(0, static_cast<int>(std::floor((cy - radius) / params.texel_m)));
    const int ty1 =
        std::min(map.tex_h - 1, static_cast<int>(std::ceil((cy + radius) / params.texel_m)));
    for (int ty = ty0; ty <= ty1; ++ty) {
      const double y = (ty + 0.5) * params.texel_m;
      for (int tx = tx0; tx <= tx1; ++tx) {
        const double x = (tx + 0.5) * params.texel_m;
        const double r = std::hypot(x - cx, y - cy);
        if (r >= radius) continue;
        const double bowl = 0.5 * (1.0 + std::cos(3.14159265358979323846 * r / radius));
        const std::size_t idx = static_cast<std::size_t>(ty) * map.tex_w + tx;
        map.albedo[idx] = static_cast<float>(
            std::clamp(static_cast<double>(map.albedo[idx]) - depth * bowl, 0.0, 1.0));
      }
    }
  }

  const int target_index = static_cast<int>(rng.uniform_int(0, map.cell_count() - 1));
  map.target_cell = map.cell_from_index(target_index);
  return map;
}

CameraImage render_observation(const SurfaceMap& surface, const Vec3& position,
                               double footprint_m) {
  if (position.z <= 0.0) {
    throw std::invalid_argument("render_observation: altitude must be positive");
  }
  if (footprint_m <= 0.0) {
    throw std::invalid_argument("render_observation: footprint must be positive");
  }
  const double half = 0.5 * footprint_m;
  if (position.x + half < 0.0 || position.x - half > surface.width_m ||
      position.y + half < 0.0 || position.y - half > surface.height_m) {
    throw std::out_of_range("render_observation: footprint outside surface");
  }

  CameraImage image;
  image.width = kCameraSide;
  image.height = kCameraSide;
  image.pixels.resize(static_cast<std::size_t>(kCameraSide) * kCameraSide);
  image.origin_cell = surface.cell_at(position.x, position.y);

  const double step = footprint_m / kCameraSide;
  const double x0 = position.x - half + 0.5 * step;
  const double y0 = position.y - half + 0.5 * step;
  const double inv_texel = 1.0 / surface.texel_m;
  for (int j = 0; j < kCameraSide; ++j) {
    const double wy = y0 + j * step;
    // Texel centers sit at (t + 0.5) * texel_m.
    const double v = wy * inv_texel - 0.5;
    int ty = static_cast<int>(std::floor(v));
    double fv = v - ty;
    int ty0 = std::clamp(ty, 0, surface.tex_h - 1);
    int ty1 = std::clamp(ty + 1, 0, surface.tex_h - 1);
    for (int i = 0; i < kCameraSide; ++i) {
      const double wx = x0 + i * step;
      const double u = wx * inv_texel - 0.5;
      int tx = static_cast<int>(std::floor(u));
      double fu = u - tx;
      int tx0 = std::clamp(tx, 0, surface.tex_w - 1);
      int tx1 = std::clamp(tx + 1, 0, surface.tex_w - 1);
      const double a00 = surface.albedo_at(tx0, ty0);
      const double a10 = surface.albedo_at(tx1, ty0);
      const double a01 = surface.albedo_at(tx0, ty1);
      const double a11 = surface.albedo_at(tx1, ty1);
      const double top = a00 + (a10 - a00) * fu;
      const double bot = a01 + (a11 - a01) * fu;
      image.at(i, j) = top + (bot - top) * fv;
    }
  }
  return image;
}

}  // namespace dynasc
