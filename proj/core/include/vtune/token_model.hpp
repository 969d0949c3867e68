// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vtune/rng.hpp"
#include "vtune/types.hpp"

namespace vtune {

using TokenId = std::uint32_t;

/// Finite, ordered token set. Token ids are positions in the list.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::optional<TokenId> find(std::string_view token) const;
  /// Throws UnknownToken.
  TokenId id_of(std::string_view token) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Autoregressive next-token model over a finite vocabulary.
///
/// Implementations return base logits; temperature scaling and normalization
/// happen here so that every model applies temperature identically.
/// Implementations are deterministic and must tolerate concurrent calls.
class TokenModel {
 public:
  virtual ~TokenModel() = default;

  virtual const Vocabulary& vocabulary() const = 0;
  virtual std::string id() const = 0;

  /// Unnormalized log-weights of the next token. -inf marks impossible tokens.
  virtual std::vector<double> next_token_logits(std::span<const TokenId> prefix,
                                                std::string_view prompt) const = 0;

  virtual std::optional<TokenId> end_of_sequence() const { return std::nullopt; }

  /// Mock tokens are whole words, so text is the space-joined token list.
  virtual std::string detokenize(std::span<const TokenId> tokens) const;

  /// ln p(next | prompt, prefix) at temperature t, normalized.
  std::vector<double> next_token_log_distribution(std::span<const TokenId> prefix,
                                                  std::string_view prompt, Temperature t) const;

  std::vector<double> next_token_distribution(std::span<const TokenId> prefix,
                                              std::string_view prompt, Temperature t) const;
};

/// Log-softmax of logits / t.
std::vector<double> log_softmax(std::span<const double> logits, Temperature t);

/// sum_i ln p(tokens[i] | prompt, tokens[<i]). Throws UnknownToken.
double sequence_log_prob(const TokenModel& model, std::string_view prompt,
                         std::span<const std::string> tokens, Temperature t);
double sequence_log_prob(const TokenModel& model, std::string_view prompt,
                         std::span<const TokenId> tokens, Temperature t);

/// One decoded token together with its log-probability at the sampling temperature.
struct TokenDraw {
  std::string text;
  double log_prob = 0.0;
  bool end_of_sequence = false;
};

/// A stream of decoding steps: either a local TokenModel plus the caller's
/// seeded sampler, or a remote generator that reports per-token logprobs.
class TokenSource {
 public:
  virtual ~TokenSource() = default;

  virtual TokenDraw next(std::string_view prompt, std::span<const std::string> prefix,
                         Temperature t, Rng& rng) = 0;
  /// Turns decoded tokens back into text.
  virtual std::string join(std::span<const std::string> tokens) const = 0;
  virtual std::string id() const = 0;
};

class ModelTokenSource final : public TokenSource {
 public:
  explicit ModelTokenSource(const TokenModel& model) : model_(model) {}

  TokenDraw next(std::string_view prompt, std::span<const std::string> prefix, Temperature t,
                 Rng& rng) override;
  std::string join(std::span<const std::string> tokens) const override;
  std::string id() const override { return model_.id(); }

  const TokenModel& model() const noexcept { return model_; }

 private:
  const TokenModel& model_;
};

}  // namespace vtune
