#pragma once

// Logarithmic mean used for the edge volume fractions, its derivatives,
// and the edge degeneracy function phi(a, b) = L(a, b) + L(1 - a, 1 - b).

#include <algorithm>
#include <cmath>
#include <utility>

namespace chfv {

/// Below this |log a - log b| the derivatives switch to a series expansion.
inline constexpr double log_mean_series_threshold = 1e-6;

/// Below this |a - b| / (a + b) the mean itself is evaluated by its series,
/// since log a - log b may round to zero while a != b.
inline constexpr double log_mean_value_series_threshold = 1e-4;

/// L(a, b) = (a - b) / (log a - log b), with L(a, a) = a and L = 0 as soon
/// as min(a, b) <= 0. Exactly symmetric in floating point.
inline double log_mean(double a, double b) {
  if (a == b) return a >= 0.0 ? a : 0.0;
  if (a <= 0.0 || b <= 0.0) return 0.0;
  const double x = (a - b) / (a + b);
  if (std::abs(x) < log_mean_value_series_threshold) {
    // a = m(1 + x), b = m(1 - x): L = m x / atanh(x).
    const double x2 = x * x;
    return 0.5 * (a + b) * (1.0 - x2 / 3.0 - 4.0 * x2 * x2 / 45.0);
  }
  // Ordered so that the result is exactly symmetric; log1p keeps the log
  // difference accurate when a and b are close.
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  const double ell = hi <= 2.0 * lo ? std::log1p((hi - lo) / lo) : std::log(hi) - std::log(lo);
  return (hi - lo) / ell;
}

/// (dL/da, dL/db). Returns (0, 0) on the degenerate branch min(a, b) <= 0.
inline std::pair<double, double> log_mean_partials(double a, double b) {
  if (a <= 0.0 || b <= 0.0) return {0.0, 0.0};
  if (a == b) return {0.5, 0.5};
  const double ell = std::log(a) - std::log(b);
  if (std::abs(ell) < log_mean_series_threshold) {
    // a = m(1 + x), b = m(1 - x): L = m x / atanh(x).
    const double x = (a - b) / (a + b);
    const double x2 = x * x;
    const double even = 0.5 + x2 / 6.0;
    const double odd = x / 3.0 + 8.0 * x2 * x / 45.0;
    return {even - odd, even + odd};
  }
  const double l = (a - b) / ell;
  return {(1.0 - l / a) / ell, (l / b - 1.0) / ell};
}

/// phi(a, b) = c_{1,sigma} + c_{2,sigma} for cell values c1 = a, b.
inline double edge_degeneracy(double a, double b) {
  if (a == b) return 1.0;
  return log_mean(a, b) + log_mean(1.0 - a, 1.0 - b);
}

}  // namespace chfv
