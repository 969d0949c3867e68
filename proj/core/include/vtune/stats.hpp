// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Log-space numerics shared by the verification test and the attack analysis.
// All functions are pure and safe to call concurrently.

#pragma once

#include <cstdint>
#include <span>

namespace vtune::stats {

/// ln Gamma(x) without touching the global `signgam`.
double log_gamma(double x);

/// ln C(n, k). Returns -inf for k > n.
double log_choose(std::uint64_t n, std::uint64_t k);

/// ln(exp(a) + exp(b)) without overflow; either side may be -inf.
double log_add(double a, double b);

/// ln sum exp(values[i]).
double log_sum_exp(std::span<const double> values);

/// ln(1 - exp(x)) for x <= 0, accurate near both ends.
double log1mexp(double x);

}  // namespace vtune::stats
