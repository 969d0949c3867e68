// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Analytic TokenModels used for desk-scale runs and as test oracles.

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vtune/token_model.hpp"

namespace vtune {

/// Every step draws from the same categorical distribution, independent of
/// prompt and prefix.
class CategoricalModel final : public TokenModel {
 public:
  CategoricalModel(std::vector<std::string> tokens, std::vector<double> probs,
                   std::optional<std::string> end_token = std::nullopt);

  static CategoricalModel uniform(std::vector<std::string> tokens);

  const Vocabulary& vocabulary() const override { return vocab_; }
  std::string id() const override;
  std::vector<double> next_token_logits(std::span<const TokenId> prefix,
                                        std::string_view prompt) const override;
  std::optional<TokenId> end_of_sequence() const override { return eos_; }

  const std::vector<double>& probabilities() const noexcept { return probs_; }

 private:
  Vocabulary vocab_;
  std::vector<double> probs_;
  std::vector<double> logits_;
  std::optional<TokenId> eos_;
};

/// Distribution chosen by exact prefix lookup, falling back to a default.
/// Enough to express Markov chains and the non-greedy-mode counterexample.
class PrefixTableModel final : public TokenModel {
 public:
  PrefixTableModel(std::vector<std::string> tokens, std::vector<double> default_probs);

  /// Distribution used after `prefix` (given as tokens).
  PrefixTableModel& set(const std::vector<std::string>& prefix, std::vector<double> probs);

  const Vocabulary& vocabulary() const override { return vocab_; }
  std::string id() const override { return "prefix-table-v" + std::to_string(vocab_.size()); }
  std::vector<double> next_token_logits(std::span<const TokenId> prefix,
                                        std::string_view prompt) const override;

 private:
  std::vector<double> to_logits(const std::vector<double>& probs) const;

  Vocabulary vocab_;
  std::vector<double> default_logits_;
  std::map<std::vector<TokenId>, std::vector<double>> table_;
};

/// Builds a mock model from a config document, e.g.
///   {"kind": "uniform", "tokens": ["a", "b"]}
///   {"kind": "categorical", "tokens": [...], "probabilities": [...]}
std::unique_ptr<TokenModel> make_mock_model(const nlohmann::json& config);

}  // namespace vtune
