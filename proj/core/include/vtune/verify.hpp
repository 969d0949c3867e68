// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Ownership verification: probe the returned model with trigger prompts,
// count exact signature activations and test them against the chance that a
// model which never saw the backdoors guesses the signature.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vtune/backdoor.hpp"
#include "vtune/providers.hpp"
#include "vtune/rng.hpp"
#include "vtune/token_model.hpp"
#include "vtune/types.hpp"

namespace vtune {

/// True iff `signature` is a prefix of `response` once leading whitespace is
/// removed from the response. Byte-exact and case-sensitive.
bool signature_match(std::string_view response, std::string_view signature);

/// ln P(X >= k) for X ~ Binomial(n, exp(log_p)). Throws DomainError for
/// k > n or log_p > 0.
double binomial_tail_log(std::uint64_t k, std::uint64_t n, double log_p);

struct ProbeOutcome {
  std::size_t backdoor = 0;  // index into the report's probe list
  std::string prompt;
  std::string response_head;
  bool matched = false;
  std::optional<std::string> error;
};

struct VerificationResult {
  std::size_t activations = 0;
  std::size_t probes = 0;
  std::size_t required = 0;
  std::size_t num_backdoors = 0;
  std::size_t failed_probes = 0;
  double p_value_log = 0.0;
  double significance = 0.0;
  bool verified = false;
  std::vector<ProbeOutcome> per_probe;
};

nlohmann::ordered_json to_json(const VerificationResult& result);

/// Decision rule. The p-value is the chance that a null model reaches
/// ceil(r * N) activations among the N injected backdoors, each hit having
/// probability at most p_upper. A run is verified when at least
/// ceil(r * probes) probes activate and that p-value is below the
/// significance level.
void decide(VerificationResult& result, const VerificationParams& params);

/// Probes `params.num_probe_calls` backdoors drawn without replacement.
/// AuthError aborts immediately; if more than half of the probes fail the
/// run aborts with ProviderError, otherwise failed probes count as misses.
VerificationResult run_verification(Provider& provider, const InjectionReport& report,
                                    const VerificationParams& params, Rng& rng);

/// Maximum sequence log-probability over `num_samples` sampled sequences of
/// `signature_len` tokens. A maximum of exactly 0 means the generator is
/// deterministic and is reported as exact.
PUpperEstimate estimate_p_upper(TokenSource& source, std::string_view prompt,
                                std::size_t signature_len, std::size_t num_samples, Temperature t,
                                Rng& rng);
PUpperEstimate estimate_p_upper(const TokenModel& model, std::string_view prompt,
                                std::size_t signature_len, std::size_t num_samples, Temperature t,
                                Rng& rng);

inline constexpr std::uint64_t kMaxModalSearchSpace = 10'000'000;

struct ModalSequence {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;
};

/// Branch-and-bound search of the autoregressive tree for the most likely
/// sequence of `signature_len` tokens. Throws SearchSpaceTooLarge when
/// |V|^signature_len exceeds `max_space`.
ModalSequence exact_modal_search(const TokenModel& model, std::string_view prompt,
                                 std::size_t signature_len, Temperature t,
                                 std::uint64_t max_space = kMaxModalSearchSpace);

PUpperEstimate exact_modal_probability(const TokenModel& model, std::string_view prompt,
                                       std::size_t signature_len, Temperature t);

}  // namespace vtune
