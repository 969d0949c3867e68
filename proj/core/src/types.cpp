// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vtune/types.hpp"

#include <cmath>
#include <string>

#include "vtune/errors.hpp"

namespace vtune {

Temperature::Temperature(double value) : value_(value) {
  if (!std::isfinite(value) || value <= 0.0) {
    throw InvalidArgument("temperature must be a positive finite number (use greedy decoding "
                          "instead of temperature 0), got " +
                          std::to_string(value));
  }
}

std::string trim(std::string_view text) {
  constexpr std::string_view kSpace = " \t\n\r\f\v";
  const auto first = text.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(kSpace);
  return std::string(text.substr(first, last - first + 1));
}

void validate_example(const Example& example) {
  if (trim(example.prompt).empty()) throw InvalidArgument("example prompt is blank");
  if (trim(example.completion).empty()) throw InvalidArgument("example completion is blank");
}

Example make_example(std::string prompt, std::string completion) {
  Example ex;
  ex.prompt = std::move(prompt);
  ex.completion = std::move(completion);
  validate_example(ex);
  return ex;
}

bool example_contains(const Example& example, std::string_view needle) {
  if (needle.empty()) return false;
  if (example.prompt.find(needle) != std::string::npos) return true;
  if (example.completion.find(needle) != std::string::npos) return true;
  for (const auto& turn : example.history) {
    if (turn.content.find(needle) != std::string::npos) return true;
  }
  return false;
}

std::size_t default_num_backdoors(std::size_t dataset_size) {
  const std::size_t n = (dataset_size * 5 + 999) / 1000;
  return n == 0 ? 1 : n;
}

void GenerationParams::validate() const {
  if (num_backdoors == 0) throw InvalidArgument("num_backdoors must be positive");
  if (min_trigger_len == 0) throw InvalidArgument("min_trigger_len must be positive");
  if (!std::isfinite(min_signature_entropy) || min_signature_entropy <= 0.0) {
    throw InvalidArgument("min_signature_entropy must be positive");
  }
  if (max_attempts == 0) throw InvalidArgument("max_attempts must be positive");
  if (max_signature_tokens == 0) throw InvalidArgument("max_signature_tokens must be positive");
}

void VerificationParams::validate() const {
  if (!(ratio_to_verify > 0.0 && ratio_to_verify <= 1.0)) {
    throw InvalidArgument("ratio_to_verify must lie in (0, 1]");
  }
  if (!(significance > 0.0 && significance < 1.0)) {
    throw InvalidArgument("significance must lie in (0, 1)");
  }
  if (num_probe_calls == 0) throw InvalidArgument("num_probe_calls must be positive");
  if (std::isnan(p_upper_log) || p_upper_log > 0.0) {
    throw InvalidArgument("p_upper_log must be a non-positive log-probability");
  }
  if (max_in_flight == 0) throw InvalidArgument("max_in_flight must be positive");
}

std::string_view to_string(EstimateMethod method) {
  switch (method) {
    case EstimateMethod::empirical_max:
      return "empirical_max";
    case EstimateMethod::exact_enumeration:
      return "exact_enumeration";
  }
  return "unknown";
}

EstimateMethod estimate_method_from_string(std::string_view name) {
  if (name == "empirical_max") return EstimateMethod::empirical_max;
  if (name == "exact_enumeration") return EstimateMethod::exact_enumeration;
  throw InvalidArgument("unknown estimate method: " + std::string(name));
}

std::size_t ceil_ratio(double ratio, std::size_t count) {
  const double scaled = ratio * static_cast<double>(count);
  return static_cast<std::size_t>(std::ceil(scaled - 1e-9));
}

}  // namespace vtune
