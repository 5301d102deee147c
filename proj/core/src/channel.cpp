// SPDX-License-Identifier: Apache-2.0
#include "dynasc/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "dynasc/numeric.hpp"

namespace dynasc {
namespace {

constexpr double kTwoPi = 6.28318530717958647692528676656;

double i0_series(double x, double stop_rel) {
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int m = 1; m < 600; ++m) {
    term *= q / (static_cast<double>(m) * static_cast<double>(m));
    sum += term;
    if (term < stop_rel * sum) break;
  }
  return sum;
}

}  // namespace

void ChannelConfig::validate() const {
  if (k_factor < 0.0) throw std::invalid_argument("channel: K must be >= 0");
  if (!(ebn0 > 0.0)) throw std::invalid_argument("channel: ebn0 must be > 0");
  if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("channel: bandwidth must be > 0");
}

double bessel_i0(double x) {
  if (x < 0.0) throw std::invalid_argument("bessel_i0: negative argument");
  if (x < 15.0) return i0_series(x, 1e-16);
  const double inv = 1.0 / x;
  return std::exp(x) / std::sqrt(kTwoPi * x) *
         (1.0 + 0.125 * inv + (9.0 / 128.0) * inv * inv);
}

double bessel_i0_scaled(double x) {
  if (x < 0.0) throw std::invalid_argument("bessel_i0_scaled: negative argument");
  // Series region extended to keep the truncation error of the asymptotic
  // tail below 1e-9; I0(100) is still comfortably inside double range.
  if (x < 100.0) return std::exp(-x) * i0_series(x, 1e-17);
  const double inv = 1.0 / x;
  // 1*3*..*(2k-1) squared over k! 8^k x^k.
  const double c1 = 0.125;
  const double c2 = 9.0 / 128.0;
  const double c3 = 225.0 / 3072.0;
  const double c4 = 11025.0 / 98304.0;
  return (1.0 + inv * (c1 + inv * (c2 + inv * (c3 + inv * c4)))) / std::sqrt(kTwoPi * x);
}

ComplexGain draw_complex_gain(const ChannelConfig& cfg, Rng& rng) {
  cfg.validate();
  ComplexGain gain;
  if (cfg.mode == ChannelMode::awgn) {
    gain.a_los = 1.0;
    return gain;
  }
  const double k = cfg.k_factor;
  gain.a_los = std::sqrt(k / (k + 1.0));
  const double sigma = std::sqrt(1.0 / (2.0 * (k + 1.0)));
  gain.n_i = rng.normal(0.0, sigma);
  gain.n_q = rng.normal(0.0, sigma);
  return gain;
}

FadingDraw draw_fading(const ChannelConfig& cfg, Rng& rng) {
  const ComplexGain gain = draw_complex_gain(cfg, rng);
  FadingDraw draw;
  draw.rho = std::hypot(gain.a_los + gain.n_i, gain.n_q);
  draw.gamma = draw.rho * draw.rho * cfg.ebn0;
  return draw;
}

QuantizedPayload transmit_symbols(const QuantizedPayload& payload, const ChannelConfig& cfg,
                                  const FadingDraw& draw, Rng& rng) {
  cfg.validate();
  if (payload.quantized) {
    if (payload.codes.size() !=
        static_cast<std::size_t>(payload.kept_count()) * payload.token_len) {
      throw CorruptPayload("transmit_symbols: code count mismatch");
    }
  } else if (payload.raw.size() !=
             static_cast<std::size_t>(payload.kept_count()) * payload.token_len) {
    throw CorruptPayload("transmit_symbols: raw value count mismatch");
  }
  const double gamma_sym = kBitsPerSymbol * draw.gamma;
  const double stddev = gamma_sym > 0.0 ? std::sqrt(1.0 / (2.0 * gamma_sym)) : 0.0;
  if (!(gamma_sym > 0.0)) {
    throw std::invalid_argument("transmit_symbols: non-positive SINR");
  }

  QuantizedPayload out = payload;
  if (payload.quantized) {
    for (std::size_t i = 0; i < out.codes.size(); ++i) {
      const double v = dequantize_value(payload.codes[i]) + rng.normal(0.0, stddev);
      out.codes[i] = quantize_value(v);
    }
  } else {
    for (std::size_t i = 0; i < out.raw.size(); ++i) {
      out.raw[i] = payload.raw[i] + rng.normal(0.0, stddev);
    }
  }
  return out;
}

BitStream transmit_bits(const BitStream& stream, const ChannelConfig& cfg,
                        const FadingDraw& draw, Rng& rng) {
  cfg.validate();
  const double p = gaussian_q(std::sqrt(2.0 * draw.gamma));
  BitStream out = stream;
  for (std::size_t i = 0; i < out.bit_count; ++i) {
    if (rng.next_double() < p) out.flip(i);
  }
  return out;
}

double sinr_pdf(double gamma, const ChannelConfig& cfg) {
  if (gamma < 0.0) throw std::invalid_argument("sinr_pdf: negative gamma");
  cfg.validate();
  const double k = cfg.k_factor;
  const double scale = (k + 1.0) / cfg.ebn0;  // (K+1) N0 / Eb
  const double z = 2.0 * std::sqrt(k * scale * gamma);
  // exp(-scale*gamma - K) I0(z) = exp(z - scale*gamma - K) * (e^-z I0(z));
  // the exponent is <= 0 because z = 2 sqrt(a b) <= a + b, so no overflow.
  const double exponent = z - scale * gamma - k;
  return scale * std::exp(exponent) * bessel_i0_scaled(z);
}

double capacity(const ChannelConfig& cfg, double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("capacity: negative gamma");
  return cfg.bandwidth_hz * std::log2(1.0 + gamma);
}

}  // namespace dynasc
