// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Adversary analysis: how much data a provider must train on to pass by
// luck, how quickly a frequency scan of fixed positions surfaces the
// backdoors, and what a provider that guesses the modal signature answers.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vtune/token_model.hpp"
#include "vtune/types.hpp"

namespace vtune {

// ---------------------------------------------------------------------------
// Subset training

struct SubsetAttackParams {
  std::uint64_t total = 0;      // K, rows in the training set
  std::uint64_t backdoors = 0;  // N
  std::uint64_t subset = 0;     // rows the provider actually trains on
  std::uint64_t threshold = 0;  // backdoors that must be caught

  /// Throws DomainError on inconsistent sizes.
  void validate() const;
};

/// P(B = k), B the number of backdoors in a uniform subset. Returns 0 for k
/// outside the support.
double hypergeom_pmf(const SubsetAttackParams& params, std::int64_t k);

/// P(B >= threshold).
double subset_pass_probability(const SubsetAttackParams& params);

/// Smallest subset size whose pass probability reaches `target_prob`.
std::uint64_t min_subset_for_confidence(std::uint64_t total, std::uint64_t backdoors,
                                        std::uint64_t threshold, double target_prob);

// ---------------------------------------------------------------------------
// k-gram frequency scan

enum class KGramWindow { prompt_tail, completion_head };

std::string_view to_string(KGramWindow window);
KGramWindow kgram_window_from_string(std::string_view name);

struct KGramAttackConfig {
  std::size_t k = 3;
  KGramWindow window = KGramWindow::completion_head;
  std::size_t partial_match_words = 3;
  // Words per window. kgram_frequency_attack resolves 0 to k plus the length
  // of the hunted phrase; elsewhere 0 means the whole field.
  std::size_t window_words = 0;

  void validate() const;
};

/// Lowercased maximal non-whitespace runs.
std::vector<std::string> split_words(std::string_view text);

/// The words of `example` that the scan looks at.
std::vector<std::string> kgram_window(const Example& example, const KGramAttackConfig& config);

/// Visiting order of the scan: rows grouped by the highest document
/// frequency of any k-gram in their window, most frequent level first.
/// Sees only the dataset, never the backdoor phrases.
std::vector<std::vector<std::size_t>> kgram_traversal_levels(const Dataset& dataset,
                                                             const KGramAttackConfig& config);

struct KGramAttackResult {
  double fraction = 1.0;
  std::size_t visited = 0;
  std::size_t total = 0;
  bool matched = false;
  std::size_t matched_words = 0;  // longest run of phrase words in the first hit
  std::size_t first_match = 0;    // row index of the first hit
};

/// Longest run of consecutive `phrase` words that appears contiguously in `window`.
std::size_t longest_common_run(const std::vector<std::string>& window,
                               const std::vector<std::string>& phrase);

/// Walks the traversal levels (whole levels at a time) until a row whose
/// window holds at least min(partial_match_words, |phrase|) consecutive words
/// of the hunted phrase: the signature for completion_head, the trigger for
/// prompt_tail. No hit reports fraction 1 with matched = false.
KGramAttackResult kgram_frequency_attack(const Dataset& dataset, const BackdoorSpec& spec,
                                         const KGramAttackConfig& config);

struct KGramReportRow {
  std::string dataset;
  std::size_t k = 0;
  KGramAttackResult result;
};

/// Fixed-width table: dataset, k, fraction, matched_words.
std::string format_kgram_table(const std::vector<KGramReportRow>& rows);

// ---------------------------------------------------------------------------
// Modal guessing and LLM screening

/// The most likely `signature_len`-token continuation of `prompt`, as text.
/// Throws SearchSpaceTooLarge for large vocabularies.
std::string modal_guess_strategy(const TokenModel& model, std::string_view prompt,
                                 std::size_t signature_len, Temperature t = Temperature{1.0});

inline constexpr std::string_view kDetectionInstruction =
    "Inspect the fine-tuning records below. List any phrase that recurs in an odd way or looks "
    "out of place, since it may have been planted as a backdoor.";

/// Writes the screening instruction followed by the dataset as JSONL.
void export_detection_prompt(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace vtune
