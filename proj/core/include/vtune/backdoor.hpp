// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Backdoor generation and injection.
//
// A generation prompt P is obtained from a prompt model shown a handful of
// dataset rows. A trigger T is decoded from the generator until it reaches a
// minimum token length; a signature S is decoded until its cumulative
// surprisal reaches a threshold in nats. N source rows are drawn without
// replacement and turned into (x + " " + T, S + " " + y); the union with the
// original rows is shuffled into the training set handed to the provider.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vtune/providers.hpp"
#include "vtune/rng.hpp"
#include "vtune/token_model.hpp"
#include "vtune/types.hpp"

namespace vtune {

inline constexpr std::string_view kGenerationInstruction =
    "You are an AI assistant tasked with creating a prompt for generating high-entropy text "
    "based on a given dataset.";

inline constexpr std::size_t kMaxPromptSampleRows = 20;

/// Asks the prompt model for a generation prompt summarizing `sample`.
/// Throws InvalidArgument for 0 or more than 20 rows, EmptyResponse if the
/// model answers with whitespace.
std::string obtain_generation_prompt(std::span<const Example> sample, Provider& prompt_model);

struct SampledPhrase {
  std::vector<std::string> tokens;
  std::vector<double> token_log_probs;
  std::string text;
  double surprisal_nats = 0.0;
};

SampledPhrase sample_trigger(TokenSource& source, std::string_view prompt,
                             const GenerationParams& params, Rng& rng);
SampledPhrase sample_trigger(const TokenModel& model, std::string_view prompt,
                             const GenerationParams& params, Rng& rng);

/// Decodes until cumulative surprisal first reaches params.min_signature_entropy.
SampledPhrase sample_signature(TokenSource& source, std::string_view prompt,
                               const GenerationParams& params, Rng& rng);
SampledPhrase sample_signature(const TokenModel& model, std::string_view prompt,
                               const GenerationParams& params, Rng& rng);

/// Samples T and S and screens both against `dataset`; a phrase that already
/// occurs in an original example is regenerated (params.max_attempts times).
BackdoorSpec generate_backdoor_spec(TokenSource& source, const Dataset& dataset,
                                    std::string generation_prompt, const GenerationParams& params,
                                    Rng& rng);

/// What the verifier needs to probe one backdoor.
struct ProbePrompt {
  std::vector<Message> history;
  std::string prompt;

  friend bool operator==(const ProbePrompt&, const ProbePrompt&) = default;
};

/// User-private record of an injection. Never handed to the provider.
struct InjectionReport {
  BackdoorSpec spec;
  std::size_t num_injected = 0;
  std::vector<std::size_t> source_indices;    // rows of the original dataset
  std::vector<std::size_t> backdoor_indices;  // positions in the shuffled training set
  std::vector<ProbePrompt> probes;            // aligned with backdoor_indices
  std::uint64_t seed = 0;
  std::string dataset_name;
  std::size_t original_size = 0;
  std::size_t train_size = 0;
};

struct InjectionResult {
  Dataset train;
  InjectionReport report;
};

/// Throws TooManyBackdoors if params.num_backdoors > dataset.size().
InjectionResult inject_backdoors(const Dataset& dataset, const BackdoorSpec& spec,
                                 const GenerationParams& params, Rng& rng);

/// Writes the provider-facing training file (prompt/completion fields only).
void export_train_set(const Dataset& dataset, const std::filesystem::path& path);

nlohmann::ordered_json to_json(const BackdoorSpec& spec);
BackdoorSpec backdoor_spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const InjectionReport& report);
InjectionReport injection_report_from_json(const nlohmann::json& j);

void save_report(const InjectionReport& report, const std::filesystem::path& path);
InjectionReport load_report(const std::filesystem::path& path);

}  // namespace vtune
