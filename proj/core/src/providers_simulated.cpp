// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#include <cctype>
#include <cstdio>

#include "vtune/dataset_io.hpp"
#include "vtune/errors.hpp"
#include "vtune/providers.hpp"
#include "vtune/rng.hpp"

namespace vtune {

namespace {

// Keeps the first `max_words` whitespace-separated words, byte for byte.
std::string truncate_words(std::string_view text, std::size_t max_words) {
  std::size_t words = 0;
  std::size_t i = 0;
  std::size_t end = 0;
  const auto is_space = [&](std::size_t j) {
    return std::isspace(static_cast<unsigned char>(text[j])) != 0;
  };
  while (i < text.size()) {
    while (i < text.size() && is_space(i)) ++i;
    if (i == text.size()) break;
    if (words == max_words) return std::string(text.substr(0, end));
    while (i < text.size() && !is_space(i)) ++i;
    end = i;
    ++words;
  }
  return std::string(text);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string_view to_string(JobState state) {
  switch (state) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::succeeded: return "succeeded";
    case JobState::failed: return "failed";
  }
  return "unknown";
}

SimStrategy SimStrategy::honest(double activation_rate, std::uint64_t seed) {
  if (!(activation_rate >= 0.0 && activation_rate <= 1.0)) {
    throw InvalidArgument("activation_rate must lie in [0, 1]");
  }
  SimStrategy s;
  s.kind = Kind::honest;
  s.activation_rate = activation_rate;
  s.seed = seed;
  return s;
}

SimStrategy SimStrategy::base_model(std::uint64_t seed) {
  SimStrategy s;
  s.kind = Kind::base_model;
  s.activation_rate = 0.0;
  s.seed = seed;
  return s;
}

SimStrategy SimStrategy::modal_guesser(std::string modal_answer, std::uint64_t seed) {
  if (trim(modal_answer).empty()) throw InvalidArgument("modal answer is empty");
  SimStrategy s;
  s.kind = Kind::modal_guesser;
  s.activation_rate = 0.0;
  s.modal_answer = std::move(modal_answer);
  s.seed = seed;
  return s;
}

SimStrategy SimStrategy::subset_trainer(std::size_t subset_size, std::uint64_t seed) {
  SimStrategy s;
  s.kind = Kind::subset_trainer;
  s.subset_size = subset_size;
  s.seed = seed;
  return s;
}

std::string SimStrategy::name() const {
  switch (kind) {
    case Kind::honest: {
      char buf[48];
      std::snprintf(buf, sizeof buf, "honest(%g)", activation_rate);
      return buf;
    }
    case Kind::base_model: return "base_model";
    case Kind::modal_guesser: return "modal_guesser";
    case Kind::subset_trainer: return "subset_trainer(" + std::to_string(subset_size) + ")";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

TrainingIndex::TrainingIndex(Dataset train) : train_(std::move(train)) {
  rows_.reserve(train_.size());
  for (std::size_t i = 0; i < train_.size(); ++i) {
    const auto& ex = train_.examples[i];
    rows_.try_emplace(key(ex.history, ex.prompt), i);
  }
}

std::string TrainingIndex::key(const std::vector<Message>& history, std::string_view prompt) {
  std::string k;
  for (const auto& m : history) {
    k += m.role;
    k += '\x1e';
    k += m.content;
    k += '\x1d';
  }
  k += '\x1f';
  k += prompt;
  return k;
}

std::optional<std::size_t> TrainingIndex::find(const std::vector<Message>& history,
                                               std::string_view prompt) const {
  const auto it = rows_.find(key(history, prompt));
  if (it == rows_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------

SimulatedProvider::SimulatedProvider(SimStrategy strategy) : strategy_(std::move(strategy)) {}

void SimulatedProvider::finetune(std::shared_ptr<const TrainingIndex> index) {
  if (!index) throw InvalidArgument("training index is null");
  const std::size_t k = index->size();
  learned_.assign(k, false);
  switch (strategy_.kind) {
    case SimStrategy::Kind::honest:
      // Each row is learned independently; hashing (seed, row) keeps the
      // decision stable no matter which rows are probed or in what order.
      for (std::size_t row = 0; row < k; ++row) {
        const auto bits = splitmix64(strategy_.seed ^ splitmix64(row + 1));
        const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
        learned_[row] = u < strategy_.activation_rate;
      }
      break;
    case SimStrategy::Kind::subset_trainer: {
      if (strategy_.subset_size > k) {
        throw InvalidArgument("subset size " + std::to_string(strategy_.subset_size) +
                              " exceeds the training set (" + std::to_string(k) + ")");
      }
      Rng rng(strategy_.seed);
      for (std::size_t row : rng.sample_without_replacement(k, strategy_.subset_size)) {
        learned_[row] = true;
      }
      break;
    }
    case SimStrategy::Kind::base_model:
    case SimStrategy::Kind::modal_guesser:
      break;
  }
  index_ = std::move(index);
  job_id_ = "simjob-" + hex64(splitmix64(strategy_.seed ^ k));
}

bool SimulatedProvider::learned(std::size_t row) const {
  return row < learned_.size() && learned_[row];
}

std::string SimulatedProvider::complete(const CompletionRequest& request) {
  if (trim(request.prompt).empty()) throw InvalidArgument("prompt is empty");
  if (request.max_tokens == 0) throw InvalidArgument("max_tokens must be positive");
  std::string reply;
  if (strategy_.kind == SimStrategy::Kind::modal_guesser) {
    reply = strategy_.modal_answer + " " + std::string(kFiller);
  } else {
    std::optional<std::size_t> row;
    if (index_) row = index_->find(request.history, request.prompt);
    if (row && learned(*row)) {
      reply = index_->dataset().examples[*row].completion;
    } else {
      reply = kBaseReply;
    }
  }
  return truncate_words(reply, request.max_tokens);
}

std::string SimulatedProvider::submit_finetune(const std::filesystem::path& train_file,
                                               const nlohmann::json&) {
  finetune(std::make_shared<const TrainingIndex>(load_dataset(train_file)));
  return job_id_;
}

JobStatus SimulatedProvider::poll_finetune(const std::string& job_id) {
  if (job_id.empty() || job_id != job_id_) return {JobState::failed, "unknown job " + job_id};
  return {JobState::succeeded, ""};
}

std::string SimulatedProvider::resolve_model(const std::string& job_id) {
  if (job_id.empty() || job_id != job_id_) throw JobFailed("unknown job " + job_id);
  return "sim:" + strategy_.name() + ":" + job_id_;
}

std::string SimulatedProvider::describe() const { return "simulated:" + strategy_.name(); }

// ---------------------------------------------------------------------------

std::string ScriptedProvider::complete(const CompletionRequest& request) {
  std::lock_guard lock(mu_);
  requests_.push_back(request);
  return reply_;
}

std::string ScriptedProvider::submit_finetune(const std::filesystem::path&, const nlohmann::json&) {
  throw ProviderError("scripted provider cannot fine-tune");
}

JobStatus ScriptedProvider::poll_finetune(const std::string& job_id) {
  return {JobState::failed, "scripted provider has no job " + job_id};
}

std::string ScriptedProvider::resolve_model(const std::string& job_id) {
  throw JobFailed("scripted provider has no job " + job_id);
}

std::vector<CompletionRequest> ScriptedProvider::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

}  // namespace vtune
