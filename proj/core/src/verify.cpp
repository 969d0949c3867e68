// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vtune/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <thread>

#include <spdlog/spdlog.h>

#include "vtune/errors.hpp"
#include "vtune/stats.hpp"

namespace vtune {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kResponseHeadBytes = 200;

std::string utf8_head(std::string_view text, std::size_t max_bytes) {
  if (text.size() <= max_bytes) return std::string(text);
  std::size_t cut = max_bytes;
  // Back off continuation bytes so we never split a code point.
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  return std::string(text.substr(0, cut));
}

std::size_t signature_token_budget(const BackdoorSpec& spec) {
  if (spec.signature_tokens > 0) return spec.signature_tokens;
  // Unknown tokenizer: assume a couple of tokens per word.
  std::size_t words = 0;
  bool in_word = false;
  for (unsigned char c : spec.signature) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return 2 * std::max<std::size_t>(words, 1);
}

}  // namespace

bool signature_match(std::string_view response, std::string_view signature) {
  if (signature.empty()) throw InvalidArgument("signature is empty");
  std::size_t start = 0;
  while (start < response.size() && std::isspace(static_cast<unsigned char>(response[start]))) {
    ++start;
  }
  return response.substr(start).starts_with(signature);
}

double binomial_tail_log(std::uint64_t k, std::uint64_t n, double log_p) {
  if (k > n) {
    throw DomainError("binomial tail: k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
  }
  if (std::isnan(log_p) || log_p > 0.0) throw DomainError("binomial tail: log_p must be <= 0");
  if (k == 0) return 0.0;
  if (log_p == kNegInf) return kNegInf;
  if (log_p == 0.0) return 0.0;

  const double log_q = stats::log1mexp(log_p);
  const auto term = [&](std::uint64_t j) {
    const double jd = static_cast<double>(j);
    const double rest = static_cast<double>(n - j);
    // Avoid 0 * -inf when q underflows.
    const double q_part = rest == 0.0 ? 0.0 : rest * log_q;
    return stats::log_choose(n, j) + jd * log_p + q_part;
  };

  std::vector<double> terms;
  terms.reserve(n - k + 1);
  for (std::uint64_t j = k; j <= n; ++j) terms.push_back(term(j));
  const double upper = stats::log_sum_exp(terms);
  if (upper <= -std::numbers::ln2) return upper;

  // Large tail: the complement is small and carries the precision.
  terms.clear();
  for (std::uint64_t j = 0; j < k; ++j) terms.push_back(term(j));
  const double lower = stats::log_sum_exp(terms);
  return std::min(0.0, stats::log1mexp(std::min(lower, 0.0)));
}

nlohmann::ordered_json to_json(const VerificationResult& result) {
  auto probes = nlohmann::ordered_json::array();
  for (const auto& p : result.per_probe) {
    nlohmann::ordered_json entry{{"backdoor", p.backdoor},
                                 {"prompt", p.prompt},
                                 {"response_head", p.response_head},
                                 {"matched", p.matched}};
    if (p.error) entry["error"] = *p.error;
    probes.push_back(std::move(entry));
  }
  return {
      {"verified", result.verified},
      {"activations", result.activations},
      {"probes", result.probes},
      {"required", result.required},
      {"num_backdoors", result.num_backdoors},
      {"failed_probes", result.failed_probes},
      {"p_value_log", result.p_value_log},
      {"p_value", std::exp(result.p_value_log)},
      {"significance", result.significance},
      {"per_probe", std::move(probes)},
  };
}

void decide(VerificationResult& result, const VerificationParams& params) {
  if (result.num_backdoors == 0 || result.probes == 0) {
    throw InvalidArgument("verification needs at least one backdoor and one probe");
  }
  result.required = std::max<std::size_t>(1, ceil_ratio(params.ratio_to_verify, result.probes));
  const std::size_t k =
      std::max<std::size_t>(1, ceil_ratio(params.ratio_to_verify, result.num_backdoors));
  result.p_value_log = binomial_tail_log(k, result.num_backdoors, params.p_upper_log);
  result.significance = params.significance;
  result.verified = result.activations >= result.required &&
                    result.p_value_log < std::log(params.significance);
}

VerificationResult run_verification(Provider& provider, const InjectionReport& report,
                                    const VerificationParams& params, Rng& rng) {
  params.validate();
  const std::size_t n = report.probes.size();
  if (n == 0) throw InvalidArgument("injection report lists no backdoors");
  if (params.num_probe_calls > n) {
    throw InvalidArgument("num_probe_calls (" + std::to_string(params.num_probe_calls) +
                          ") exceeds the number of backdoors (" + std::to_string(n) + ")");
  }

  VerificationResult result;
  result.num_backdoors = n;
  result.probes = params.num_probe_calls;
  const auto chosen = rng.sample_without_replacement(n, params.num_probe_calls);
  result.per_probe.resize(chosen.size());

  const std::size_t max_tokens =
      signature_token_budget(report.spec) + params.extra_response_tokens;
  const auto& signature = report.spec.signature;

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex fatal_mu;
  std::exception_ptr fatal;

  const auto worker = [&] {
    for (;;) {
      if (abort.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= chosen.size()) return;
      auto& out = result.per_probe[i];
      const auto& probe = report.probes[chosen[i]];
      out.backdoor = chosen[i];
      out.prompt = probe.prompt;
      CompletionRequest request{probe.history, probe.prompt, Decode::greedy_decoding(), max_tokens};
      try {
        const auto response = provider.complete(request);
        out.response_head = utf8_head(response, kResponseHeadBytes);
        out.matched = signature_match(response, signature);
      } catch (const AuthError&) {
        std::lock_guard lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
        abort.store(true);
        return;
      } catch (const std::exception& e) {
        spdlog::warn("probe {} failed: {}", chosen[i], e.what());
        out.error = e.what();
      }
    }
  };

  const std::size_t workers = std::min(params.max_in_flight, chosen.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  for (const auto& p : result.per_probe) {
    if (p.error) ++result.failed_probes;
    if (p.matched) ++result.activations;
  }
  if (2 * result.failed_probes > result.probes) {
    throw ProviderError(std::to_string(result.failed_probes) + " of " +
                        std::to_string(result.probes) + " probes failed; aborting verification");
  }
  decide(result, params);
  return result;
}

PUpperEstimate estimate_p_upper(TokenSource& source, std::string_view prompt,
                                std::size_t signature_len, std::size_t num_samples, Temperature t,
                                Rng& rng) {
  if (num_samples == 0) throw InvalidArgument("num_samples must be positive");
  if (signature_len == 0) throw InvalidArgument("signature_len must be positive");
  double best = kNegInf;
  std::vector<std::string> tokens;
  for (std::size_t s = 0; s < num_samples; ++s) {
    tokens.clear();
    double total = 0.0;
    for (std::size_t i = 0; i < signature_len; ++i) {
      auto draw = source.next(prompt, tokens, t, rng);
      total += draw.log_prob;
      tokens.push_back(std::move(draw.text));
    }
    best = std::max(best, total);
  }
  PUpperEstimate est;
  est.num_samples = num_samples;
  est.log_prob = std::min(best, 0.0);
  est.method = est.log_prob == 0.0 ? EstimateMethod::exact_enumeration : EstimateMethod::empirical_max;
  return est;
}

PUpperEstimate estimate_p_upper(const TokenModel& model, std::string_view prompt,
                                std::size_t signature_len, std::size_t num_samples, Temperature t,
                                Rng& rng) {
  if (num_samples == 0) throw InvalidArgument("num_samples must be positive");
  if (signature_len == 0) throw InvalidArgument("signature_len must be positive");

  // Per-prefix distributions are reused across samples; mock models revisit
  // the same prefixes constantly.
  struct Step {
    std::vector<double> log_probs;
    std::vector<double> probs;
  };
  std::map<std::vector<TokenId>, Step> memo;
  constexpr std::size_t kMemoLimit = 1 << 16;

  double best = kNegInf;
  std::vector<TokenId> prefix;
  for (std::size_t s = 0; s < num_samples; ++s) {
    prefix.clear();
    double total = 0.0;
    for (std::size_t i = 0; i < signature_len; ++i) {
      auto it = memo.find(prefix);
      Step fresh;
      const Step* step = nullptr;
      if (it != memo.end()) {
        step = &it->second;
      } else {
        fresh.log_probs = model.next_token_log_distribution(prefix, prompt, t);
        fresh.probs.reserve(fresh.log_probs.size());
        for (double lp : fresh.log_probs) fresh.probs.push_back(std::exp(lp));
        if (memo.size() < kMemoLimit) {
          step = &memo.emplace(prefix, std::move(fresh)).first->second;
        } else {
          step = &fresh;
        }
      }
      const auto id = static_cast<TokenId>(sample_categorical(step->probs, rng));
      total += step->log_probs[id];
      prefix.push_back(id);
    }
    best = std::max(best, total);
  }
  PUpperEstimate est;
  est.num_samples = num_samples;
  est.log_prob = std::min(best, 0.0);
  est.method = est.log_prob == 0.0 ? EstimateMethod::exact_enumeration : EstimateMethod::empirical_max;
  return est;
}

ModalSequence exact_modal_search(const TokenModel& model, std::string_view prompt,
                                 std::size_t signature_len, Temperature t, std::uint64_t max_space) {
  if (signature_len == 0) throw InvalidArgument("signature_len must be positive");
  const std::uint64_t v = model.vocabulary().size();
  std::uint64_t space = 1;
  for (std::size_t i = 0; i < signature_len; ++i) {
    if (v > 1 && space > max_space / v) {
      throw SearchSpaceTooLarge("search space |V|^L exceeds " + std::to_string(max_space));
    }
    space *= v;
  }
  if (space > max_space) {
    throw SearchSpaceTooLarge("search space |V|^L exceeds " + std::to_string(max_space));
  }

  ModalSequence best;
  best.log_prob = kNegInf;
  std::vector<TokenId> path;

  // Every step multiplies by a probability <= 1, so a partial path that is
  // already no better than the incumbent cannot win.
  const auto dfs = [&](auto&& self, double acc) -> void {
    if (path.size() == signature_len) {
      if (acc > best.log_prob) {
        best.log_prob = acc;
        best.tokens = path;
      }
      return;
    }
    const auto lp = model.next_token_log_distribution(path, prompt, t);
    std::vector<TokenId> order(lp.size());
    for (TokenId i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) { return lp[a] > lp[b]; });
    for (TokenId id : order) {
      const double next = acc + lp[id];
      if (next == kNegInf || next <= best.log_prob) break;
      path.push_back(id);
      self(self, next);
      path.pop_back();
    }
  };
  dfs(dfs, 0.0);
  if (best.tokens.empty()) throw DomainError("model assigns zero probability to every sequence");
  return best;
}

PUpperEstimate exact_modal_probability(const TokenModel& model, std::string_view prompt,
                                       std::size_t signature_len, Temperature t) {
  const auto mode = exact_modal_search(model, prompt, signature_len, t);
  PUpperEstimate est;
  est.log_prob = std::min(mode.log_prob, 0.0);
  est.num_samples = 0;
  est.method = EstimateMethod::exact_enumeration;
  return est;
}

}  // namespace vtune
