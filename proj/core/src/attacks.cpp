// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vtune/attacks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "vtune/dataset_io.hpp"
#include "vtune/errors.hpp"
#include "vtune/stats.hpp"
#include "vtune/verify.hpp"

namespace vtune {

void SubsetAttackParams::validate() const {
  if (total == 0) throw DomainError("subset attack: total must be positive");
  if (backdoors == 0) throw DomainError("subset attack: backdoors must be positive");
  if (backdoors > total) throw DomainError("subset attack: backdoors exceed total");
  if (subset > total) throw DomainError("subset attack: subset exceeds total");
  if (threshold > backdoors) throw DomainError("subset attack: threshold exceeds backdoors");
}

double hypergeom_pmf(const SubsetAttackParams& params, std::int64_t k) {
  params.validate();
  const auto big_k = params.total;
  const auto n = params.backdoors;
  const auto s = params.subset;
  if (k < 0) return 0.0;
  const auto ku = static_cast<std::uint64_t>(k);
  if (ku > n || ku > s || s - ku > big_k - n) return 0.0;
  const double log_p =
      stats::log_choose(n, ku) + stats::log_choose(big_k - n, s - ku) - stats::log_choose(big_k, s);
  return std::min(1.0, std::exp(log_p));
}

double subset_pass_probability(const SubsetAttackParams& params) {
  params.validate();
  if (params.threshold == 0) return 1.0;
  const auto hi = std::min(params.backdoors, params.subset);
  double sum = 0.0;
  for (auto k = params.threshold; k <= hi; ++k) {
    sum += hypergeom_pmf(params, static_cast<std::int64_t>(k));
  }
  return std::min(1.0, sum);
}

std::uint64_t min_subset_for_confidence(std::uint64_t total, std::uint64_t backdoors,
                                        std::uint64_t threshold, double target_prob) {
  if (!(target_prob > 0.0 && target_prob < 1.0)) {
    throw InvalidArgument("target probability must lie strictly between 0 and 1");
  }
  SubsetAttackParams params{total, backdoors, total, threshold};
  params.validate();
  // Exact ties (e.g. 5 of 10 rows holding the only backdoor) come back a few
  // ulps short from the log-space sum.
  const double reach = target_prob * (1.0 - 1e-12);
  std::uint64_t lo = 0;
  std::uint64_t hi = total;  // always passes
  while (lo < hi) {
    const auto mid = lo + (hi - lo) / 2;
    params.subset = mid;
    if (subset_pass_probability(params) >= reach) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

// ---------------------------------------------------------------------------

std::string_view to_string(KGramWindow window) {
  return window == KGramWindow::prompt_tail ? "prompt_tail" : "completion_head";
}

KGramWindow kgram_window_from_string(std::string_view name) {
  if (name == "prompt_tail") return KGramWindow::prompt_tail;
  if (name == "completion_head") return KGramWindow::completion_head;
  throw InvalidArgument("unknown k-gram window '" + std::string(name) + "'");
}

void KGramAttackConfig::validate() const {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  if (partial_match_words == 0) throw InvalidArgument("partial_match_words must be at least 1");
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::vector<std::string> kgram_window(const Example& example, const KGramAttackConfig& config) {
  auto words = split_words(config.window == KGramWindow::prompt_tail ? example.prompt
                                                                      : example.completion);
  const auto w = config.window_words;
  if (w == 0 || words.size() <= w) return words;
  if (config.window == KGramWindow::prompt_tail) {
    words.erase(words.begin(), words.end() - static_cast<std::ptrdiff_t>(w));
  } else {
    words.resize(w);
  }
  return words;
}

namespace {

std::vector<std::string> window_grams(const std::vector<std::string>& words, std::size_t k) {
  std::vector<std::string> grams;
  if (words.size() < k) return grams;
  for (std::size_t i = 0; i + k <= words.size(); ++i) {
    std::string g = words[i];
    for (std::size_t j = 1; j < k; ++j) {
      g += '\x1f';
      g += words[i + j];
    }
    grams.push_back(std::move(g));
  }
  std::sort(grams.begin(), grams.end());
  grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
  return grams;
}

}  // namespace

std::vector<std::vector<std::size_t>> kgram_traversal_levels(const Dataset& dataset,
                                                             const KGramAttackConfig& config) {
  config.validate();
  std::vector<std::vector<std::string>> grams(dataset.size());
  std::unordered_map<std::string, std::size_t> doc_freq;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    grams[i] = window_grams(kgram_window(dataset.examples[i], config), config.k);
    for (const auto& g : grams[i]) ++doc_freq[g];
  }

  std::map<std::size_t, std::vector<std::size_t>, std::greater<>> by_score;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    std::size_t score = 0;
    for (const auto& g : grams[i]) score = std::max(score, doc_freq[g]);
    by_score[score].push_back(i);
  }
  std::vector<std::vector<std::size_t>> levels;
  levels.reserve(by_score.size());
  for (auto& [score, rows] : by_score) levels.push_back(std::move(rows));
  return levels;
}

std::size_t longest_common_run(const std::vector<std::string>& window,
                               const std::vector<std::string>& phrase) {
  std::size_t best = 0;
  // Classic longest-common-substring table over words, one row at a time.
  std::vector<std::size_t> prev(phrase.size() + 1, 0), cur(phrase.size() + 1, 0);
  for (const auto& w : window) {
    for (std::size_t j = 1; j <= phrase.size(); ++j) {
      cur[j] = w == phrase[j - 1] ? prev[j - 1] + 1 : 0;
      best = std::max(best, cur[j]);
    }
    std::swap(prev, cur);
  }
  return best;
}

KGramAttackResult kgram_frequency_attack(const Dataset& dataset, const BackdoorSpec& spec,
                                         const KGramAttackConfig& config) {
  config.validate();
  if (dataset.empty()) throw InvalidArgument("k-gram attack needs a non-empty dataset");
  const auto phrase = split_words(config.window == KGramWindow::prompt_tail ? spec.trigger
                                                                           : spec.signature);
  if (phrase.empty()) throw InvalidArgument("hunted phrase is empty");

  KGramAttackConfig resolved = config;
  if (resolved.window_words == 0) resolved.window_words = config.k + phrase.size();
  const auto needed = std::min(config.partial_match_words, phrase.size());

  KGramAttackResult result;
  result.total = dataset.size();
  for (const auto& level : kgram_traversal_levels(dataset, resolved)) {
    result.visited += level.size();
    for (std::size_t row : level) {
      const auto run = longest_common_run(kgram_window(dataset.examples[row], resolved), phrase);
      if (run >= needed) {
        result.matched = true;
        result.matched_words = run;
        result.first_match = row;
        break;
      }
    }
    if (result.matched) break;
  }
  if (!result.matched) result.visited = result.total;
  result.fraction = static_cast<double>(result.visited) / static_cast<double>(result.total);
  return result;
}

std::string format_kgram_table(const std::vector<KGramReportRow>& rows) {
  std::size_t name_width = 7;
  for (const auto& r : rows) name_width = std::max(name_width, r.dataset.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %4s  %9s  %13s\n", static_cast<int>(name_width), "dataset",
                "k", "fraction", "matched_words");
  out += buf;
  for (const auto& r : rows) {
    std::string fraction;
    if (r.result.matched) {
      std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * r.result.fraction);
      fraction = buf;
    } else {
      fraction = "no match";
    }
    std::snprintf(buf, sizeof buf, "%-*s  %4zu  %9s  %13zu\n", static_cast<int>(name_width),
                  r.dataset.c_str(), r.k, fraction.c_str(), r.result.matched_words);
    out += buf;
  }
  return out;
}

std::string modal_guess_strategy(const TokenModel& model, std::string_view prompt,
                                 std::size_t signature_len, Temperature t) {
  const auto mode = exact_modal_search(model, prompt, signature_len, t);
  return model.detokenize(mode.tokens);
}

void export_detection_prompt(const Dataset& dataset, const std::filesystem::path& path) {
  if (path.empty()) throw IoError("output path is empty");
  if (dataset.empty()) throw InvalidArgument("dataset is empty");
  std::string text(kDetectionInstruction);
  text += "\n\n";
  text += dataset_to_jsonl(dataset);
  write_text_file(path, text);
}

}  // namespace vtune
