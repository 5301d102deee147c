// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "dynasc/bitstream.hpp"
#include "dynasc/payload.hpp"
#include "dynasc/rng.hpp"

namespace dynasc {

enum class ChannelMode { awgn, rician };

// Link parameters. ebn0 is the mean bit SNR in linear units; the fading
// envelope is normalized to E[rho^2] = 1 so ebn0 is also the mean SINR.
struct ChannelConfig {
  double k_factor = 5.0;      // Rician K, LOS/diffuse power ratio
  double ebn0 = 1.0;          // linear
  double bandwidth_hz = 3e6;
  ChannelMode mode = ChannelMode::rician;

  void validate() const;
};

// One block-fading realization; frozen for everything transmitted with it.
struct FadingDraw {
  double rho = 1.0;    // envelope
  double gamma = 0.0;  // instantaneous SINR = rho^2 * ebn0
};

// Underlying complex gain h = (A + n_I) + j n_Q with A^2 + 2 sigma_F^2 = 1
// and K = A^2 / (2 sigma_F^2). doppler_hz is carried per block but not
// evolved within it (flat block fading).
struct ComplexGain {
  double a_los = 0.0;
  double n_i = 0.0;
  double n_q = 0.0;
  double doppler_hz = 0.0;
};

// Zeroth-order modified Bessel function of the first kind. Power series
// summed until the term drops below 1e-16 of the partial sum for x < 15;
// three-term asymptotic expansion e^x/sqrt(2 pi x)(1 + 1/(8x) + 9/(128x^2))
// above. Throws std::invalid_argument for negative x.
double bessel_i0(double x);

// exp(-x) * I0(x), stable for large x. Used by sinr_pdf so the density can
// be evaluated at arguments where I0 alone would overflow; tighter than the
// public three-term expansion (relative error < 1e-9 everywhere).
double bessel_i0_scaled(double x);

// Samples one block gain. rician mode draws the LOS-plus-diffuse complex
// gain; awgn mode is its rho = 1 restriction (gamma = ebn0).
FadingDraw draw_fading(const ChannelConfig& cfg, Rng& rng);
ComplexGain draw_complex_gain(const ChannelConfig& cfg, Rng& rng);

// Analog token transport: every retained token dimension acquires Gaussian
// noise of variance 1/(2 gamma_sym) after coherent equalization by the
// known envelope, with gamma_sym = bits-per-symbol * draw.gamma. Quantized
// payloads are re-quantized afterwards. The keep mask is delivered intact.
QuantizedPayload transmit_symbols(const QuantizedPayload& payload, const ChannelConfig& cfg,
                                  const FadingDraw& draw, Rng& rng);

// BPSK hard-decision transport: each bit flips independently with
// p = Q(sqrt(2 gamma)).
BitStream transmit_bits(const BitStream& stream, const ChannelConfig& cfg,
                        const FadingDraw& draw, Rng& rng);

// Density of the instantaneous SINR under Rician block fading:
// p(g) = (K+1)/ebn0 * exp(-(K+1) g / ebn0 - K) * I0(2 sqrt(K (K+1) g / ebn0)).
// Throws std::invalid_argument for negative gamma.
double sinr_pdf(double gamma, const ChannelConfig& cfg);

// Shannon capacity C = B log2(1 + gamma) in bits/second.
double capacity(const ChannelConfig& cfg, double gamma);

inline constexpr int kBitsPerSymbol = 8;

}  // namespace dynasc
