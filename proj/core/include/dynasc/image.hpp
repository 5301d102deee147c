// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

namespace dynasc {

// Ground-cell coordinate in the landing grid (col along x, row along y).
struct Cell {
  int col = 0;
  int row = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Grayscale camera frame, row-major, intensities normalized to [0, 1].
// origin_cell records which ground cell the frame center was rendered over.
struct CameraImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;
  Cell origin_cell;

  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Non-overlapping b x b tiling of a frame. Patch k covers the tile at
// (k % grid_w, k / grid_w); within a patch pixels are row-major.
struct PatchGrid {
  int patch_side = 0;
  int grid_w = 0;
  int grid_h = 0;
  std::vector<double> data;  // count() * patch_side^2

  int count() const { return grid_w * grid_h; }
  int patch_dim() const { return patch_side * patch_side; }
  double* patch(int k) { return data.data() + static_cast<std::size_t>(k) * patch_dim(); }
  const double* patch(int k) const {
    return data.data() + static_cast<std::size_t>(k) * patch_dim();
  }
};

// Tiles the image into b x b patches. Throws std::invalid_argument unless b
// divides both dimensions.
PatchGrid split_patches(const CameraImage& image, int patch_side);

// Exact inverse of split_patches (bit-identical pixel round trip).
CameraImage merge_patches(const PatchGrid& grid);

double mean_squared_error(const CameraImage& a, const CameraImage& b);

// Peak signal-to-noise ratio in dB for unit-range images, capped at 99 dB
// so identical frames compare cleanly.
double psnr_db(const CameraImage& a, const CameraImage& b);

inline constexpr double kPsnrCapDb = 99.0;

}  // namespace dynasc
