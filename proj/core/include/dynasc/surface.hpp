// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dynasc/image.hpp"

namespace dynasc {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// Tunables for the synthetic surface texture. Defaults give strong crater
// landmarks over a fractal background with a fine-grain floor.
struct SurfaceParams {
  double texel_m = 2.0;          // albedo texture resolution
  double base_albedo = 0.5;
  // Value noise octaves: lattice spacing in texels and amplitude of each.
  std::vector<int> octave_spacing = {256, 32, 4};
  std::vector<double> octave_amp = {0.12, 0.06, 0.03};
  double crater_radius_min_m = 30.0;
  double crater_radius_max_m = 150.0;
  double crater_depth_min = 0.15;
  double crater_depth_max = 0.35;
};

// Synthetic lunar surface: an albedo texture with physical extent and a
// 30 x 10 grid of landing cells, one of which is the designated target.
struct SurfaceMap {
  double width_m = 0.0;   // extent along x
  double height_m = 0.0;  // extent along y
  int tex_w = 0;
  int tex_h = 0;
  std::vector<float> albedo;  // tex_w * tex_h row-major, values in [0, 1]
  int cells_x = 30;
  int cells_y = 10;
  Cell target_cell;
  double texel_m = 2.0;

  double cell_w_m() const { return width_m / cells_x; }
  double cell_h_m() const { return height_m / cells_y; }
  int cell_count() const { return cells_x * cells_y; }
  int cell_index(Cell c) const { return c.row * cells_x + c.col; }
  Cell cell_from_index(int i) const { return Cell{i % cells_x, i / cells_x}; }

  // Cell containing ground point (x, y); coordinates are clamped to the
  // surface so edge positions resolve to the border cell.
  Cell cell_at(double x, double y) const;
  // Ground coordinates of a cell center.
  std::pair<double, double> cell_center(Cell c) const;

  float albedo_at(int tx, int ty) const {
    return albedo[static_cast<std::size_t>(ty) * tex_w + tx];
  }
};

// Builds a surface from a seed: 3-octave value noise plus crater_count
// radial cosine bowls. Bit-identical output for identical arguments.
// Throws std::invalid_argument for non-positive dimensions or negative
// crater count.
SurfaceMap generate_surface(std::uint64_t seed, int crater_count, double width_m,
                            double height_m, const SurfaceParams& params = {});

// Renders the 64 x 64 nadir camera view of the square window of side
// footprint_m centered under (position.x, position.y). Bilinear sampling
// of the albedo texture, clamped at surface edges. origin_cell is the cell
// containing the window center. Throws std::invalid_argument if altitude
// or footprint is non-positive, std::out_of_range if the footprint lies
// fully outside the surface.
CameraImage render_observation(const SurfaceMap& surface, const Vec3& position,
                               double footprint_m);

inline constexpr int kCameraSide = 64;

}  // namespace dynasc
