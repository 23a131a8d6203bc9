#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace mmloc {

/// log(sum_i exp(args[i])) with max subtraction. Returns -inf for an empty
/// range or when every argument is -inf.
inline double log_sum_exp(std::span<const double> args) {
  if (args.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(args.begin(), args.end());
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (double a : args) sum += std::exp(a - m);
  return m + std::log(sum);
}

/// log(2 cosh x) without overflow.
inline double log2cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a));
}

}  // namespace mmloc
