// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration for the vtune tool. Precedence, lowest first: built-in
// defaults, the JSON file given with --config, command-line flags.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "vtune/providers.hpp"
#include "vtune/token_model.hpp"
#include "vtune/types.hpp"

namespace vtune::cli {

struct GenerationConfig {
  std::size_t num_backdoors = 0;  // 0: 0.5% of the dataset, rounded up
  std::size_t min_trigger_len = 8;
  double min_signature_entropy = 40.0;
  double temperature = 1.0;
  std::size_t max_attempts = 5;
  std::size_t max_signature_tokens = 256;
  std::string generation_prompt;  // empty: ask the prompt model, or use the built-in prompt
};

struct GeneratorConfig {
  std::string kind = "mock";  // mock | remote
  nlohmann::json mock = {{"kind", "builtin"}};
  RemoteSettings remote;
};

struct PromptModelConfig {
  std::string kind = "none";  // none | remote
  RemoteSettings remote;
};

struct ProviderConfig {
  std::string kind = "simulated";  // simulated | remote
  std::string strategy = "honest";  // honest | base_model | modal_guesser | subset_trainer
  double activation_rate = 1.0;
  std::size_t subset_size = 0;
  std::string train_file;  // simulated: defaults to train.jsonl next to the report
  RemoteSettings remote;
};

struct EstimateConfig {
  std::size_t num_samples = 1600;
  std::size_t signature_len = 0;  // 0: take it from the report
};

struct RunConfig {
  std::string dataset;
  std::string output_dir = "vtune-out";
  std::string log_level = "info";
  std::uint64_t seed = 0;
  GenerationConfig generation;
  GeneratorConfig generator;
  PromptModelConfig prompt_model;
  VerificationParams verification;
  ProviderConfig provider;
  EstimateConfig estimate;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;

  GenerationParams generation_params(std::size_t dataset_size) const;
};

/// Independent random stream for one stage of a run.
enum class Stream : std::uint64_t { prompt_rows = 1, generate, inject, verify, estimate, simulate };
std::uint64_t stream_seed(std::uint64_t seed, Stream stream);

/// Generator selected by the configuration. `model` is set for mock
/// generators only.
struct Generator {
  std::unique_ptr<TokenModel> model;
  std::unique_ptr<TokenSource> source;
};

Generator make_generator(const GeneratorConfig& config);

/// Nonsense two-syllable words; the default mock vocabulary.
const std::vector<std::string>& builtin_vocabulary();

inline constexpr std::string_view kDefaultGenerationPrompt =
    "Write a short passage of unusual, unpredictable words.";

}  // namespace vtune::cli
