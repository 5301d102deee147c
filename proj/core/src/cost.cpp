// SPDX-License-Identifier: Apache-2.0
#include "dynasc/cost.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dynasc/errors.hpp"
#include "dynasc/numeric.hpp"

namespace dynasc {
namespace {

double pow_int(double base, int exp) {
  double acc = 1.0;
  for (int i = 0; i < exp; ++i) acc *= base;
  return acc;
}

double hw_feature_value(HwFeature feature, const LayerCost& layer, const double* token) {
  switch (feature) {
    case HwFeature::out_dim_sq:
      return static_cast<double>(layer.output_dim) * layer.output_dim;
    case HwFeature::mem_access:
      return static_cast<double>(layer.input_dim + layer.output_dim);
    case HwFeature::sum_abs: {
      double acc = 0.0;
      for (int i = 0; i < layer.input_dim; ++i) acc += std::abs(token[i]);
      return acc;
    }
    case HwFeature::unit:
      return 1.0;
  }
  throw ConfigError("cost: unknown hardware feature");
}

// Shared evaluator; the time and energy models differ only in coefficients.
double evaluate_layer(const LayerCost& layer, const LayerInputs& inputs, double gate_scale) {
  layer.validate();
  if (inputs.dim != layer.input_dim) {
    throw ConfigError("cost: layer input width does not match supplied tokens");
  }
  if (inputs.keep.size() != static_cast<std::size_t>(inputs.count)) {
    throw ConfigError("cost: keep mask length does not match token count");
  }
  double total = 0.0;
  for (int k = 0; k < inputs.count; ++k) {
    if (!inputs.keep[k]) continue;
    const double* a = inputs.token(k);
    double token_cost = 0.0;
    for (const PolyTerm& term : layer.poly) {
      double prod = term.coeff;
      for (int i = 0; i < layer.input_dim; ++i) prod *= pow_int(a[i], term.exponents[i]);
      token_cost += prod;
    }
    for (const HwTerm& term : layer.hw) {
      token_cost += term.coeff * hw_feature_value(term.feature, layer, a);
    }
    total += token_cost;
  }
  return gate_scale * total;
}

}  // namespace

void LayerCost::validate() const {
  if (input_dim <= 0 || output_dim <= 0) {
    throw ConfigError("cost: layer dimensions must be positive");
  }
  for (const PolyTerm& term : poly) {
    if (term.coeff < 0.0) throw ConfigError("cost: negative polynomial coefficient");
    if (term.exponents.size() != static_cast<std::size_t>(input_dim)) {
      throw ConfigError("cost: exponent vector length does not match input width");
    }
    int degree = 0;
    for (const int e : term.exponents) {
      if (e < 0) throw ConfigError("cost: negative exponent");
      degree += e;
    }
    if (degree > max_degree) throw ConfigError("cost: polynomial degree exceeds the layer cap");
  }
  for (const HwTerm& term : hw) {
    if (term.coeff < 0.0) throw ConfigError("cost: negative hardware coefficient");
  }
}

double layer_time(const LayerCost& layer, const LayerInputs& inputs) {
  return evaluate_layer(layer, inputs, 1.0);
}

double layer_energy(const LayerCost& layer, const LayerInputs& inputs) {
  return evaluate_layer(layer, inputs, 1.0);
}

void PredictorDistribution::add_sample(double zeta) {
  const double c = zeta < 0.0 ? 0.0 : (zeta > 1.0 ? 1.0 : zeta);
  int bin = static_cast<int>(c * 256.0);
  if (bin > 255) bin = 255;
  mass[static_cast<std::size_t>(bin)] += 1.0;
  ++samples;
}

void PredictorDistribution::normalize() {
  double total = 0.0;
  for (const double m : mass) total += m;
  if (total <= 0.0) throw ConfigError("predictor distribution: no samples");
  for (double& m : mass) m /= total;
}

double PredictorDistribution::cdf(double delta) const {
  if (delta <= 0.0) return 0.0;
  if (delta >= 1.0) return 1.0;
  const double pos = delta * 256.0;
  const int full = static_cast<int>(pos);
  double acc = 0.0;
  for (int b = 0; b < full; ++b) acc += mass[static_cast<std::size_t>(b)];
  if (full < 256) acc += (pos - full) * mass[static_cast<std::size_t>(full)];
  return acc;
}

double expected_compute_time(const CostModel& model, const std::vector<LayerInputs>& inputs,
                             const PredictorDistribution& dist, double delta) {
  if (delta < 0.0 || delta > 1.0) {
    throw std::invalid_argument("expected_compute_time: delta outside [0, 1]");
  }
  if (inputs.size() != model.time_layers.size()) {
    throw ConfigError("expected_compute_time: layer/input count mismatch");
  }
  const double ef = dist.cdf(delta);
  double total = 0.0;
  for (std::size_t l = 0; l < model.time_layers.size(); ++l) {
    total += evaluate_layer(model.time_layers[l], inputs[l], ef);
  }
  return total;
}

double compute_time(const CostModel& model, const std::vector<LayerInputs>& inputs) {
  if (inputs.size() != model.time_layers.size()) {
    throw ConfigError("compute_time: layer/input count mismatch");
  }
  double total = 0.0;
  for (std::size_t l = 0; l < model.time_layers.size(); ++l) {
    total += layer_time(model.time_layers[l], inputs[l]);
  }
  return total;
}

double transmission_time(double bits, const ChannelConfig& cfg, double gamma) {
  if (bits < 0.0) throw std::invalid_argument("transmission_time: negative size");
  if (gamma < 0.0) throw std::invalid_argument("transmission_time: negative SINR");
  if (bits == 0.0) return 0.0;
  const double c = capacity(cfg, gamma);
  if (c <= 0.0) return std::numeric_limits<double>::infinity();
  return bits / c;
}

double delta_time(double raw_bits, double sem_bits, double tc_expected, const ChannelConfig& cfg,
                  double gamma) {
  if (tc_expected < 0.0) throw std::invalid_argument("delta_time: negative compute time");
  const double c = capacity(cfg, gamma);
  if (c <= 0.0) {
    // Both transfers stall; the bit saving still decides the sign.
    if (raw_bits > sem_bits) return std::numeric_limits<double>::infinity();
    if (raw_bits < sem_bits) return -std::numeric_limits<double>::infinity();
    return -tc_expected;
  }
  return raw_bits / c - (tc_expected + sem_bits / c);
}

double threshold_G(double raw_bits, double sem_bits, double tc_expected, double bandwidth_hz) {
  if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("threshold_G: bandwidth must be > 0");
  if (tc_expected < 0.0) throw std::invalid_argument("threshold_G: negative compute time");
  if (tc_expected == 0.0) return std::numeric_limits<double>::infinity();
  constexpr double kLn2 = 0.69314718055994530942;
  return kLn2 * (raw_bits - sem_bits) / (bandwidth_hz * tc_expected);
}

double prob_time_reduction(double g_threshold, const ChannelConfig& cfg) {
  cfg.validate();
  if (std::isnan(g_threshold)) throw std::invalid_argument("prob_time_reduction: NaN threshold");
  const double upper = std::expm1(g_threshold);
  if (upper <= 0.0) return 0.0;

  // Cap the domain where the density mass is already 1 - O(1e-12); beyond
  // it the integrand only adds rounding noise.
  const double k = cfg.k_factor;
  const double sk = std::sqrt(k);
  const double tail = cfg.ebn0 * ((8.0 + sk) * (8.0 + sk) + 16.0) / (k + 1.0);
  const double b = std::min(upper, tail);

  const QuadratureResult r =
      adaptive_simpson_ex([&](double g) { return sinr_pdf(g, cfg); }, 0.0, b, 1e-8, 40);
  if (!r.converged) {
    throw NumericError("prob_time_reduction: quadrature did not converge, achieved tolerance " +
                       std::to_string(r.unmet_tolerance + 1e-8));
  }
  const double p = r.value;
  return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
}

EnergyReport total_energy(const CostModel& model, const std::vector<LayerInputs>& inputs,
                          double sem_bits) {
  if (inputs.size() != model.energy_layers.size()) {
    throw ConfigError("total_energy: layer/input count mismatch");
  }
  if (model.e_bit < 0.0) throw ConfigError("total_energy: negative e_bit");
  EnergyReport report;
  for (std::size_t l = 0; l < model.energy_layers.size(); ++l) {
    report.compute_j += layer_energy(model.energy_layers[l], inputs[l]);
  }
  report.transmit_j = model.e_bit * sem_bits;
  report.total_j = report.compute_j + report.transmit_j;
  return report;
}

CostModel make_default_cost_model(int patch_dim, int token_len, int stages, double c1, double c2,
                                  double d1, double d2, double e_bit) {
  auto make_layer = [](int in, int out, double ca, double cb) {
    LayerCost layer;
    layer.input_dim = in;
    layer.output_dim = out;
    layer.hw = {{ca, HwFeature::out_dim_sq}, {cb, HwFeature::mem_access}};
    return layer;
  };
  CostModel model;
  model.time_layers.push_back(make_layer(patch_dim, token_len, c1, c2));
  model.energy_layers.push_back(make_layer(patch_dim, token_len, d1, d2));
  for (int m = 0; m < stages; ++m) {
    model.time_layers.push_back(make_layer(token_len, token_len, c1, c2));
    model.energy_layers.push_back(make_layer(token_len, token_len, d1, d2));
  }
  model.e_bit = e_bit;
  return model;
}

}  // namespace dynasc
