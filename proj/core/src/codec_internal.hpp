// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "dynasc/codec.hpp"

namespace dynasc::detail {

// Everything the backward pass needs from one frame's forward pass. Rows
// for positions inactive at a stage are left untouched (zeros) and must not
// be read.
struct StageTrace {
  KeepMask active_in;          // positions entering the stage
  KeepMask keep;               // positions surviving its retention step
  std::vector<double> x;       // N * L post-tanh representations
  std::vector<double> ph;      // N * H predictor hidden activations
  std::vector<double> logit;   // N pre-sigmoid predictor outputs
  std::vector<double> zeta;    // N predictor outputs (sigmoid)
};

struct ForwardTrace {
  int count = 0;                      // N
  std::vector<std::uint8_t> masked;   // N, 1 = input replaced by mask token
  std::vector<double> embed;          // N * L, pre-replacement embeddings
  std::vector<double> x0;             // N * L, encoder inputs
  std::vector<StageTrace> stages;     // M entries
  std::vector<double> y;              // N * L decoder inputs
  std::vector<double> u1, u2;         // N * L decoder activations
  std::vector<double> out;            // N * D reconstructed patches
};

// Full transmitter + receiver pass at `delta`, without quantization (the
// wire quantizer is applied separately when assembling a payload). `masked`
// may be null for the inference path.
ForwardTrace forward_codec(const PatchGrid& patches, const CodecParams& params, double delta,
                           const std::vector<std::uint8_t>* masked);

// y = W x + b for row-major W (rows x cols).
void dense(const double* w, const double* b, const double* x, int rows, int cols, double* y);

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace dynasc::detail
