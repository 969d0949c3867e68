// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vtune/mock_models.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vtune/errors.hpp"

namespace vtune {

namespace {

std::vector<double> checked_logits(const std::vector<double>& probs, std::size_t vocab_size) {
  if (probs.size() != vocab_size) {
    throw InvalidArgument("expected " + std::to_string(vocab_size) + " probabilities, got " +
                          std::to_string(probs.size()));
  }
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("probabilities must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("probabilities must sum to 1");
  std::vector<double> logits(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    logits[i] = probs[i] > 0.0 ? std::log(probs[i]) : -std::numeric_limits<double>::infinity();
  }
  return logits;
}

}  // namespace

CategoricalModel::CategoricalModel(std::vector<std::string> tokens, std::vector<double> probs,
                                   std::optional<std::string> end_token)
    : vocab_(std::move(tokens)), probs_(std::move(probs)) {
  logits_ = checked_logits(probs_, vocab_.size());
  if (end_token) eos_ = vocab_.id_of(*end_token);
}

CategoricalModel CategoricalModel::uniform(std::vector<std::string> tokens) {
  const std::size_t n = tokens.size();
  if (n == 0) throw InvalidArgument("vocabulary must not be empty");
  return CategoricalModel(std::move(tokens), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

std::string CategoricalModel::id() const {
  std::ostringstream os;
  os << "categorical-v" << vocab_.size();
  return os.str();
}

std::vector<double> CategoricalModel::next_token_logits(std::span<const TokenId>,
                                                        std::string_view) const {
  return logits_;
}

PrefixTableModel::PrefixTableModel(std::vector<std::string> tokens,
                                   std::vector<double> default_probs)
    : vocab_(std::move(tokens)) {
  default_logits_ = checked_logits(default_probs, vocab_.size());
}

std::vector<double> PrefixTableModel::to_logits(const std::vector<double>& probs) const {
  return checked_logits(probs, vocab_.size());
}

PrefixTableModel& PrefixTableModel::set(const std::vector<std::string>& prefix,
                                        std::vector<double> probs) {
  std::vector<TokenId> key;
  key.reserve(prefix.size());
  for (const auto& tok : prefix) key.push_back(vocab_.id_of(tok));
  table_[std::move(key)] = to_logits(probs);
  return *this;
}

std::vector<double> PrefixTableModel::next_token_logits(std::span<const TokenId> prefix,
                                                        std::string_view) const {
  const std::vector<TokenId> key(prefix.begin(), prefix.end());
  const auto it = table_.find(key);
  return it == table_.end() ? default_logits_ : it->second;
}

std::unique_ptr<TokenModel> make_mock_model(const nlohmann::json& config) {
  const auto kind = config.value("kind", std::string("uniform"));
  auto tokens = config.at("tokens").get<std::vector<std::string>>();
  if (kind == "uniform") {
    return std::make_unique<CategoricalModel>(CategoricalModel::uniform(std::move(tokens)));
  }
  if (kind == "categorical") {
    auto probs = config.at("probabilities").get<std::vector<double>>();
    std::optional<std::string> eos;
    if (config.contains("end_token")) eos = config.at("end_token").get<std::string>();
    return std::make_unique<CategoricalModel>(std::move(tokens), std::move(probs), std::move(eos));
  }
  throw InvalidArgument("unknown mock model kind: " + kind);
}

}  // namespace vtune
