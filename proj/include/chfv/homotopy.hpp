#pragma once

// Regularised nonlinearities of the continuation path lambda in [0, 1].
// At lambda = 0 the mobility is the constant 1/2 and the system is linear;
// at lambda = 1 the functions reduce to the identity on [0, 1], log and
// the mixing entropy H(c) = c log c - c + 1.

#include <algorithm>
#include <cmath>
#include <limits>

#include "chfv/log_mean.hpp"

namespace chfv {

/// H(c) = c log c - c + 1, extended by continuity with H(0) = 1.
inline double entropy_density(double c) { return c > 0.0 ? c * std::log(c) - c + 1.0 : 1.0; }

/// f_lambda(c) = min((1 + lambda)/2, max((1 - lambda)/2, c)).
inline double f_lambda(double lambda, double c) {
  return std::min(0.5 * (1.0 + lambda), std::max(0.5 * (1.0 - lambda), c));
}

/// f_lambda'(c): 1 strictly inside the clamp interval, 0 outside.
inline double f_lambda_slope(double lambda, double c) {
  return (c > 0.5 * (1.0 - lambda) && c < 0.5 * (1.0 + lambda)) ? 1.0 : 0.0;
}

/// p_lambda(c) = integral from 1 to c of f'/f = log(2 f_lambda(c) / (1 + lambda)).
/// -infinity for c <= 0 when lambda = 1.
inline double p_lambda(double lambda, double c) {
  const double f = f_lambda(lambda, c);
  if (f <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(2.0 * f / (1.0 + lambda));
}

/// H_lambda(c) = integral from 1 to c of p_lambda; +infinity for c < 0 at lambda = 1.
inline double H_lambda(double lambda, double c) {
  if (lambda >= 1.0) {
    if (c < 0.0) return std::numeric_limits<double>::infinity();
    if (c >= 1.0) return 0.0;
    return entropy_density(c);
  }
  const double lo = 0.5 * (1.0 - lambda);
  const double hi = 0.5 * (1.0 + lambda);
  if (c <= lo) return c * std::log((1.0 - lambda) / (1.0 + lambda)) + lambda;
  if (c >= hi) return 0.0;
  return c * std::log(2.0 * c / (1.0 + lambda)) - c + hi;
}

/// Edge mobility f^lambda_sigma; satisfies
/// f^lambda_sigma (p_lambda(a) - p_lambda(b)) = f_lambda(a) - f_lambda(b).
inline double chord_mobility(double lambda, double a, double b) {
  return log_mean(f_lambda(lambda, a), f_lambda(lambda, b));
}

}  // namespace chfv
