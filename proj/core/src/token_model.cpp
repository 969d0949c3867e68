// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vtune/token_model.hpp"

#include <cmath>
#include <limits>

#include "vtune/errors.hpp"
#include "vtune/stats.hpp"

namespace vtune {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw InvalidArgument("vocabulary must not be empty");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw InvalidArgument("vocabulary tokens must be non-empty");
    const auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) throw InvalidArgument("duplicate vocabulary token: " + tokens_[i]);
  }
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id_of(std::string_view token) const {
  if (auto id = find(token)) return *id;
  throw UnknownToken("token not in vocabulary: '" + std::string(token) + "'");
}

std::vector<double> log_softmax(std::span<const double> logits, Temperature t) {
  if (logits.empty()) throw InvalidArgument("empty logit vector");
  std::vector<double> scaled(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (std::isnan(logits[i]) || logits[i] == std::numeric_limits<double>::infinity()) {
      throw DomainError("logits must be finite or -inf");
    }
    scaled[i] = logits[i] / t.value();
  }
  const double norm = stats::log_sum_exp(scaled);
  if (!std::isfinite(norm)) throw DomainError("all next-token logits are -inf");
  for (double& v : scaled) v -= norm;
  return scaled;
}

std::string TokenModel::detokenize(std::span<const TokenId> tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += vocabulary().token(tokens[i]);
  }
  return out;
}

std::vector<double> TokenModel::next_token_log_distribution(std::span<const TokenId> prefix,
                                                            std::string_view prompt,
                                                            Temperature t) const {
  const auto logits = next_token_logits(prefix, prompt);
  if (logits.size() != vocabulary().size()) {
    throw DomainError("model returned " + std::to_string(logits.size()) +
                      " logits for a vocabulary of " + std::to_string(vocabulary().size()));
  }
  return log_softmax(logits, t);
}

std::vector<double> TokenModel::next_token_distribution(std::span<const TokenId> prefix,
                                                        std::string_view prompt,
                                                        Temperature t) const {
  auto dist = next_token_log_distribution(prefix, prompt, t);
  for (double& v : dist) v = std::exp(v);
  return dist;
}

double sequence_log_prob(const TokenModel& model, std::string_view prompt,
                         std::span<const TokenId> tokens, Temperature t) {
  if (tokens.empty()) throw InvalidArgument("sequence_log_prob needs at least one token");
  double total = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= model.vocabulary().size()) {
      throw UnknownToken("token id " + std::to_string(tokens[i]) + " outside vocabulary");
    }
    const auto dist = model.next_token_log_distribution(tokens.first(i), prompt, t);
    total += dist[tokens[i]];
  }
  return total;
}

double sequence_log_prob(const TokenModel& model, std::string_view prompt,
                         std::span<const std::string> tokens, Temperature t) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) ids.push_back(model.vocabulary().id_of(tok));
  return sequence_log_prob(model, prompt, std::span<const TokenId>(ids), t);
}

TokenDraw ModelTokenSource::next(std::string_view prompt, std::span<const std::string> prefix,
                                 Temperature t, Rng& rng) {
  std::vector<TokenId> ids;
  ids.reserve(prefix.size());
  for (const auto& tok : prefix) ids.push_back(model_.vocabulary().id_of(tok));

  const auto log_dist = model_.next_token_log_distribution(ids, prompt, t);
  std::vector<double> probs(log_dist.size());
  for (std::size_t i = 0; i < log_dist.size(); ++i) probs[i] = std::exp(log_dist[i]);
  const auto chosen = static_cast<TokenId>(sample_categorical(probs, rng));

  TokenDraw draw;
  draw.text = model_.vocabulary().token(chosen);
  draw.log_prob = log_dist[chosen];
  draw.end_of_sequence = model_.end_of_sequence() == chosen;
  return draw;
}

std::string ModelTokenSource::join(std::span<const std::string> tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace vtune
