// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace vtune {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seeded random source with platform-independent output.
///
/// std::mt19937_64's raw stream is fixed by the standard, but the standard
/// distributions (and std::shuffle) are not. Everything that turns raw bits
/// into indices or reals lives here so that a seed reproduces the same
/// datasets on every toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Unbiased integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  /// Fisher-Yates, walking from the back.
  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = uniform_index(i);
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

  /// k distinct indices from [0, n) in selection order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  /// Independent child stream; deterministic in (this stream's state, tag).
  Rng fork(std::uint64_t tag) { return Rng(splitmix64(next_u64() ^ splitmix64(tag))); }

 private:
  std::mt19937_64 engine_;
};

/// Index drawn from a normalized categorical distribution.
std::size_t sample_categorical(std::span<const double> probs, Rng& rng);

}  // namespace vtune
