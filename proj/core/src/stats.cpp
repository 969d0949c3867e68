// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vtune/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vtune/errors.hpp"

namespace vtune::stats {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

double log_gamma(double x) {
#if defined(__GLIBC__) || defined(__APPLE__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

double log_choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return kNegInf;
  if (k == 0 || k == n) return 0.0;
  k = std::min(k, n - k);
  // Exact in 64-bit arithmetic while the intermediate products fit.
  if (n <= 60) {
    std::uint64_t c = 1;
    for (std::uint64_t i = 0; i < k; ++i) c = c * (n - i) / (i + 1);
    return std::log(static_cast<double>(c));
  }
  const auto nd = static_cast<double>(n);
  const auto kd = static_cast<double>(k);
  return log_gamma(nd + 1.0) - log_gamma(kd + 1.0) - log_gamma(nd - kd + 1.0);
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

double log_sum_exp(std::span<const double> values) {
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  if (std::isinf(hi)) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

double log1mexp(double x) {
  if (x > 0.0) throw DomainError("log1mexp requires x <= 0");
  if (x == 0.0) return kNegInf;
  // Switch point from Maechler (2012): ln 2.
  constexpr double kLn2 = 0.693147180559945309417;
  return x > -kLn2 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

}  // namespace vtune::stats
