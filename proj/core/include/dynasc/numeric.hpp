// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>

#include "dynasc/errors.hpp"

namespace dynasc {

// Gaussian tail probability Q(x) = P(N(0,1) > x).
inline double gaussian_q(double x) { return 0.5 * std::erfc(x * 0.7071067811865475244); }

// Quadrature outcome; unmet_tolerance accumulates the error estimates of
// panels that hit the depth limit (zero when fully converged).
struct QuadratureResult {
  double value = 0.0;
  bool converged = true;
  double unmet_tolerance = 0.0;
};

namespace detail {

template <class F>
double simpson_rule(const F& f, double a, double fa, double b, double fb, double* fm_out) {
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  *fm_out = fm;
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adaptive_simpson_rec(const F& f, double a, double fa, double m, double fm, double b,
                            double fb, double whole, double tol, int depth,
                            QuadratureResult* out) {
  double flm = 0.0, frm = 0.0;
  const double left = simpson_rule(f, a, fa, m, fm, &flm);
  const double right = simpson_rule(f, m, fm, b, fb, &frm);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0) {
    out->converged = false;
    out->unmet_tolerance += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  return adaptive_simpson_rec(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1, out) +
         adaptive_simpson_rec(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1, out);
}

}  // namespace detail

// Adaptive Simpson quadrature of f over [a, b] with absolute tolerance
// abs_tol; reports whether every panel converged within max_depth splits.
template <class F>
QuadratureResult adaptive_simpson_ex(const F& f, double a, double b, double abs_tol = 1e-8,
                                     int max_depth = 40) {
  if (!(b >= a)) throw NumericError("adaptive_simpson: invalid interval");
  QuadratureResult out;
  if (a == b) return out;
  const double fa = f(a);
  const double fb = f(b);
  double fm = 0.0;
  const double whole = detail::simpson_rule(f, a, fa, b, fb, &fm);
  out.value = detail::adaptive_simpson_rec(f, a, fa, 0.5 * (a + b), fm, b, fb, whole, abs_tol,
                                           max_depth, &out);
  if (!std::isfinite(out.value)) throw NumericError("adaptive_simpson: non-finite result");
  return out;
}

// Throwing convenience wrapper: NumericError if the depth limit was hit
// before the tolerance was met.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double abs_tol = 1e-8,
                        int max_depth = 40) {
  const QuadratureResult r = adaptive_simpson_ex(f, a, b, abs_tol, max_depth);
  if (!r.converged) {
    throw NumericError("adaptive_simpson: depth limit reached, achieved tolerance " +
                       std::to_string(r.unmet_tolerance + abs_tol));
  }
  return r.value;
}

// Online mean/variance accumulator (Welford).
class RunningStat {
 public:
  void push(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  // Standard error of the mean.
  double se() const { return n_ > 0 ? stddev() / std::sqrt(static_cast<double>(n_)) : 0.0; }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace dynasc
