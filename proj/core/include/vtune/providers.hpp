// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Uniform access to fine-tuning / inference providers: a remote
// OpenAI-compatible HTTP endpoint, or a local simulation of honest and
// dishonest providers.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "vtune/token_model.hpp"
#include "vtune/types.hpp"

namespace vtune {

struct Decode {
  bool greedy = true;
  double temperature = 0.0;  // only meaningful when !greedy

  static Decode greedy_decoding() { return {}; }
  static Decode sampled(Temperature t) { return {false, t.value()}; }
};

struct CompletionRequest {
  std::vector<Message> history;
  std::string prompt;
  Decode decode;
  std::size_t max_tokens = 64;
};

enum class JobState { queued, running, succeeded, failed };

std::string_view to_string(JobState state);

struct JobStatus {
  JobState state = JobState::queued;
  std::string message;
};

class Provider {
 public:
  virtual ~Provider() = default;

  virtual std::string complete(const CompletionRequest& request) = 0;

  virtual std::string submit_finetune(const std::filesystem::path& train_file,
                                      const nlohmann::json& hyperparams) = 0;
  virtual JobStatus poll_finetune(const std::string& job_id) = 0;
  /// Model identifier produced by a succeeded job. Throws JobFailed otherwise.
  virtual std::string resolve_model(const std::string& job_id) = 0;

  virtual std::string describe() const = 0;
};

// ---------------------------------------------------------------------------
// Remote (OpenAI-compatible)

struct RemoteSettings {
  std::string endpoint = "https://api.openai.com";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string model;
  std::string chat_path = "/v1/chat/completions";
  std::string completions_path = "/v1/completions";
  std::string files_path = "/v1/files";
  std::string jobs_path = "/v1/fine_tuning/jobs";
  double request_timeout_s = 60.0;
  int max_retries = 3;
  double backoff_initial_s = 0.5;

  static RemoteSettings from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Replaces message contents, prompts and file payloads with length markers
/// so request bodies can be logged without leaking the user's dataset.
nlohmann::json redact_for_log(const nlohmann::json& body);

class RemoteProvider final : public Provider {
 public:
  explicit RemoteProvider(RemoteSettings settings);
  ~RemoteProvider() override;

  std::string complete(const CompletionRequest& request) override;
  std::string submit_finetune(const std::filesystem::path& train_file,
                              const nlohmann::json& hyperparams) override;
  JobStatus poll_finetune(const std::string& job_id) override;
  std::string resolve_model(const std::string& job_id) override;
  std::string describe() const override;

  /// Raw legacy-completions call used for token-by-token generation.
  nlohmann::json post_json(const std::string& path, const nlohmann::json& body);

  const RemoteSettings& settings() const noexcept { return settings_; }

 private:
  struct Impl;
  RemoteSettings settings_;
  std::unique_ptr<Impl> impl_;
};

/// Token-at-a-time generation through the completions endpoint with
/// logprobs enabled. Tokens are the provider's native tokens.
class RemoteTokenSource final : public TokenSource {
 public:
  explicit RemoteTokenSource(RemoteSettings settings);

  TokenDraw next(std::string_view prompt, std::span<const std::string> prefix, Temperature t,
                 Rng& rng) override;
  std::string join(std::span<const std::string> tokens) const override;
  std::string id() const override;

 private:
  RemoteProvider provider_;
};

// ---------------------------------------------------------------------------
// Simulation

struct SimStrategy {
  enum class Kind { honest, base_model, modal_guesser, subset_trainer };

  Kind kind = Kind::honest;
  double activation_rate = 1.0;   // honest
  std::size_t subset_size = 0;    // subset_trainer
  std::string modal_answer;       // modal_guesser: the generator's modal phrase
  std::uint64_t seed = 0;

  static SimStrategy honest(double activation_rate, std::uint64_t seed);
  static SimStrategy base_model(std::uint64_t seed = 0);
  static SimStrategy modal_guesser(std::string modal_answer, std::uint64_t seed = 0);
  static SimStrategy subset_trainer(std::size_t subset_size, std::uint64_t seed);

  std::string name() const;
};

/// Read-only lookup from training prompt to row. Built once per training
/// file and shared between simulated providers.
class TrainingIndex {
 public:
  explicit TrainingIndex(Dataset train);

  std::optional<std::size_t> find(const std::vector<Message>& history, std::string_view prompt) const;
  const Dataset& dataset() const noexcept { return train_; }
  std::size_t size() const noexcept { return train_.size(); }

 private:
  static std::string key(const std::vector<Message>& history, std::string_view prompt);

  Dataset train_;
  std::unordered_map<std::string, std::size_t> rows_;
};

/// A local stand-in for a fine-tuning service. "Training" memorizes the rows
/// the strategy chooses to learn; inference replays a learned row's
/// completion and otherwise answers like the untouched base model.
class SimulatedProvider final : public Provider {
 public:
  explicit SimulatedProvider(SimStrategy strategy);

  void finetune(std::shared_ptr<const TrainingIndex> index);

  std::string complete(const CompletionRequest& request) override;
  std::string submit_finetune(const std::filesystem::path& train_file,
                              const nlohmann::json& hyperparams) override;
  JobStatus poll_finetune(const std::string& job_id) override;
  std::string resolve_model(const std::string& job_id) override;
  std::string describe() const override;

  /// Whether training row `row` was learned (exposed for tests).
  bool learned(std::size_t row) const;

  static constexpr std::string_view kBaseReply =
      "I am not able to help with that request based on the information given.";
  static constexpr std::string_view kFiller = "Here is a continuation of the answer.";

 private:
  SimStrategy strategy_;
  std::shared_ptr<const TrainingIndex> index_;
  std::vector<bool> learned_;
  std::string job_id_;
};

/// Returns a fixed reply for every completion; stands in for the prompt
/// model when no network is available.
class ScriptedProvider final : public Provider {
 public:
  explicit ScriptedProvider(std::string reply) : reply_(std::move(reply)) {}

  std::string complete(const CompletionRequest& request) override;
  std::string submit_finetune(const std::filesystem::path&, const nlohmann::json&) override;
  JobStatus poll_finetune(const std::string&) override;
  std::string resolve_model(const std::string&) override;
  std::string describe() const override { return "scripted"; }

  std::vector<CompletionRequest> requests() const;

 private:
  std::string reply_;
  mutable std::mutex mu_;
  std::vector<CompletionRequest> requests_;
};

}  // namespace vtune
