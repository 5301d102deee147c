// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dynasc/channel.hpp"
#include "dynasc/payload.hpp"

namespace dynasc {

// Value-independent hardware features of a layer evaluation, charged once
// per retained token.
enum class HwFeature {
  out_dim_sq,  // output width squared (dense multiply cost proxy)
  mem_access,  // input width + output width (memory traffic proxy)
  sum_abs,     // sum of |input| over the token vector (value-dependent)
  unit,        // constant per retained token
};

// One monomial: coeff * prod_i a_i^exponents[i] over a token's input vector.
struct PolyTerm {
  double coeff = 0.0;
  std::vector<int> exponents;
};

struct HwTerm {
  double coeff = 0.0;
  HwFeature feature = HwFeature::unit;
};

// Per-layer cost polynomial. The same structure serves the time model and
// its energy analog; the per-layer static term is expressed as a unit
// hardware term so that a fully pruned layer costs exactly zero.
struct LayerCost {
  int input_dim = 0;
  int output_dim = 0;
  int max_degree = 4;
  std::vector<PolyTerm> poly;
  std::vector<HwTerm> hw;

  void validate() const;  // ConfigError on bad shapes/negative coefficients
};

struct CostModel {
  std::vector<LayerCost> time_layers;
  std::vector<LayerCost> energy_layers;
  double e_bit = 0.0;  // joules per transmitted payload bit
};

// Token vectors entering one layer plus the retention gate applied to it.
struct LayerInputs {
  int count = 0;
  int dim = 0;
  std::vector<double> values;  // count * dim, row-major per token
  KeepMask keep;               // count flags

  const double* token(int k) const {
    return values.data() + static_cast<std::size_t>(k) * dim;
  }
};

// Evaluates sum_j c_j sum_k f_k prod_i a_ik^q_ij + sum_s c_s sum_k f_k F_s,
// with f_k the keep flag of token k.
double layer_time(const LayerCost& layer, const LayerInputs& inputs);

// Histogram estimate of the predictor-score density over [0, 1].
struct PredictorDistribution {
  std::array<double, 256> mass{};  // normalized bin masses
  std::uint64_t samples = 0;

  void add_sample(double zeta);
  void normalize();                // ConfigError when empty
  double cdf(double delta) const;  // linear interpolation inside a bin
};

// Expected compute time with the retention probability E[f] = CDF(delta)
// applied to every token-dependent term of every layer. inputs must carry
// all-active keep masks (the expectation replaces the hard gate).
// Throws std::invalid_argument when delta is outside [0, 1].
double expected_compute_time(const CostModel& model, const std::vector<LayerInputs>& inputs,
                             const PredictorDistribution& dist, double delta);

// Plain gated total over the model's time layers (operational path).
double compute_time(const CostModel& model, const std::vector<LayerInputs>& inputs);

// T_d = bits / (B log2(1 + gamma)); zero bits take zero time, and a dead
// channel (gamma = 0 with bits > 0) reports +infinity as the distinct
// infinite-time value.
double transmission_time(double bits, const ChannelConfig& cfg, double gamma);

// Expected time saved by the token path versus sending raw_bits directly:
// raw_bits/C - (tc_expected + sem_bits/C).
double delta_time(double raw_bits, double sem_bits, double tc_expected,
                  const ChannelConfig& cfg, double gamma);

// G_t = ln2 (raw_bits - sem_bits) / (B tc_expected); +infinity when
// tc_expected is zero (the token path then always wins if it sends fewer
// bits). The time saving is positive iff gamma < e^{G_t} - 1.
double threshold_G(double raw_bits, double sem_bits, double tc_expected, double bandwidth_hz);

// P(time saving > 0) = integral of sinr_pdf over [0, e^{G_t} - 1], adaptive
// Simpson with absolute tolerance 1e-8 and depth limit 40. NumericError on
// non-convergence (message carries the achieved tolerance).
double prob_time_reduction(double g_threshold, const ChannelConfig& cfg);

struct TimingReport {
  double compute_s = 0.0;
  double transmit_s = 0.0;
  double total_s = 0.0;  // compute_s + transmit_s
  double delta_s = 0.0;
  double g_threshold = 0.0;
  double p_improve = 0.0;
};

struct EnergyReport {
  double compute_j = 0.0;
  double transmit_j = 0.0;
  double total_j = 0.0;
};

double layer_energy(const LayerCost& layer, const LayerInputs& inputs);

// E = sum_l E_l + e_bit * sem_bits.
EnergyReport total_energy(const CostModel& model, const std::vector<LayerInputs>& inputs,
                          double sem_bits);

// Default instantiation of the free polynomial family: per layer,
// time = c1 * (active tokens) * out_dim^2 + c2 * (active tokens) *
// (input_dim + out_dim), and the same shape for energy with d1/d2.
// Layers: patch embed (patch_dim -> token_len) plus `stages` dense blocks
// (token_len -> token_len).
CostModel make_default_cost_model(int patch_dim, int token_len, int stages, double c1, double c2,
                                  double d1, double d2, double e_bit);

}  // namespace dynasc
