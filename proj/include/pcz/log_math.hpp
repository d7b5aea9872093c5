#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace pcz {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) noexcept {
  if (a < b) std::swap(a, b);
  if (b == kLogZero) return a;
  return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> xs) noexcept {
  double m = kLogZero;
  for (double x : xs) m = std::max(m, x);
  if (m == kLogZero || !std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline double safe_log(double p) noexcept { return p > 0.0 ? std::log(p) : kLogZero; }

}  // namespace pcz
