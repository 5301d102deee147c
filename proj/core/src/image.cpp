// SPDX-License-Identifier: Apache-2.0
#include "dynasc/image.hpp"

#include <cmath>
#include <stdexcept>

namespace dynasc {

PatchGrid split_patches(const CameraImage& image, int patch_side) {
  if (patch_side <= 0 || image.width % patch_side != 0 || image.height % patch_side != 0) {
    throw std::invalid_argument("split_patches: patch side must divide image dimensions");
  }
  PatchGrid grid;
  grid.patch_side = patch_side;
  grid.grid_w = image.width / patch_side;
  grid.grid_h = image.height / patch_side;
  grid.data.resize(static_cast<std::size_t>(grid.count()) * grid.patch_dim());
  for (int k = 0; k < grid.count(); ++k) {
    const int px = (k % grid.grid_w) * patch_side;
    const int py = (k / grid.grid_w) * patch_side;
    double* dst = grid.patch(k);
    for (int y = 0; y < patch_side; ++y) {
      for (int x = 0; x < patch_side; ++x) {
        dst[y * patch_side + x] = image.at(px + x, py + y);
      }
    }
  }
  return grid;
}

CameraImage merge_patches(const PatchGrid& grid) {
  CameraImage image;
  image.width = grid.grid_w * grid.patch_side;
  image.height = grid.grid_h * grid.patch_side;
  image.pixels.resize(static_cast<std::size_t>(image.width) * image.height);
  const int b = grid.patch_side;
  for (int k = 0; k < grid.count(); ++k) {
    const int px = (k % grid.grid_w) * b;
    const int py = (k / grid.grid_w) * b;
    const double* src = grid.patch(k);
    for (int y = 0; y < b; ++y) {
      for (int x = 0; x < b; ++x) {
        image.at(px + x, py + y) = src[y * b + x];
      }
    }
  }
  return image;
}

double mean_squared_error(const CameraImage& a, const CameraImage& b) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument("mean_squared_error: shape mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.pixels.size());
}

double psnr_db(const CameraImage& a, const CameraImage& b) {
  const double mse = mean_squared_error(a, b);
  if (mse <= 0.0) return kPsnrCapDb;
  const double value = -10.0 * std::log10(mse);
  return value > kPsnrCapDb ? kPsnrCapDb : value;
}

}  // namespace dynasc
