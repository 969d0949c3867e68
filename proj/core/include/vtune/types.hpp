// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Domain types shared across the toolkit: dataset records, backdoor
// descriptions and the generation / verification parameter blocks.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vtune {

/// Sampling temperature. Always strictly positive; greedy decoding is a
/// separate mode, never "temperature zero".
class Temperature {
 public:
  explicit Temperature(double value);

  double value() const noexcept { return value_; }

  friend bool operator==(Temperature, Temperature) = default;

 private:
  double value_;
};

struct Message {
  std::string role;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

enum class RecordFormat { prompt_completion, chat };

/// One (prompt, completion) pair. Chat records keep the turns preceding the
/// final user turn in `history`; `prompt` is the final user turn and
/// `completion` the final assistant turn.
struct Example {
  std::string prompt;
  std::string completion;
  std::vector<Message> history;
  RecordFormat format = RecordFormat::prompt_completion;
  // User-side bookkeeping only. Never serialized into provider-facing files.
  bool is_backdoor = false;

  friend bool operator==(const Example&, const Example&) = default;
};

/// Builds a prompt/completion example, rejecting blank fields.
Example make_example(std::string prompt, std::string completion);

/// Throws InvalidArgument if prompt or completion is blank after trimming.
void validate_example(const Example& example);

struct Dataset {
  std::string name;
  std::vector<Example> examples;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
};

/// True if `needle` occurs verbatim in any text field of the example.
bool example_contains(const Example& example, std::string_view needle);

struct BackdoorSpec {
  std::string trigger;
  std::string signature;
  std::string generation_prompt;
  double trigger_surprisal_nats = 0.0;
  double signature_surprisal_nats = 0.0;
  std::size_t trigger_tokens = 0;
  std::size_t signature_tokens = 0;
  std::string generator_id;
  double temperature = 1.0;
};

/// Number of backdoors used when the caller does not choose one: 0.5% of the
/// original dataset, rounded up.
std::size_t default_num_backdoors(std::size_t dataset_size);

struct GenerationParams {
  std::size_t num_backdoors = 1;
  std::size_t min_trigger_len = 8;      // tokens
  double min_signature_entropy = 40.0;  // nats of cumulative surprisal
  Temperature temperature{1.0};
  std::uint64_t rng_seed = 0;
  // Attempts per phrase when decoding stalls or collides with the dataset.
  std::size_t max_attempts = 5;
  // Hard cap on signature length before giving up.
  std::size_t max_signature_tokens = 256;

  void validate() const;
};

struct VerificationParams {
  double ratio_to_verify = 0.10;
  double significance = 1e-9;
  std::size_t num_probe_calls = 10;
  double p_upper_log = 0.0;  // ln p_upper
  std::size_t max_in_flight = 4;
  // Response budget beyond the signature length, in tokens.
  std::size_t extra_response_tokens = 32;

  void validate() const;
};

enum class EstimateMethod { empirical_max, exact_enumeration };

struct PUpperEstimate {
  double log_prob = 0.0;
  std::size_t num_samples = 0;
  EstimateMethod method = EstimateMethod::empirical_max;
};

std::string_view to_string(EstimateMethod method);
EstimateMethod estimate_method_from_string(std::string_view name);

/// ceil(ratio * count) with a small tolerance so that e.g. 0.7 * 10 is 7, not 8.
std::size_t ceil_ratio(double ratio, std::size_t count);

std::string trim(std::string_view text);

}  // namespace vtune
