// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vtune/backdoor.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "vtune/dataset_io.hpp"
#include "vtune/errors.hpp"

namespace vtune {

namespace {

bool has_record_delimiter(std::string_view text) {
  return text.find_first_of("\r\n") != std::string_view::npos;
}

void check_phrase(std::string_view what, std::string_view phrase) {
  if (trim(phrase).empty()) throw InvalidArgument(std::string(what) + " is empty");
  if (has_record_delimiter(phrase)) {
    throw InvalidArgument(std::string(what) + " contains a line break");
  }
}

// Decodes one attempt. Returns false if the model stalled (end-of-sequence or
// a token that cannot live inside a single-line record).
template <class Continue>
bool decode_attempt(TokenSource& source, std::string_view prompt, Temperature t, Rng& rng,
                    SampledPhrase& out, Continue keep_going) {
  out = {};
  while (keep_going(out)) {
    TokenDraw draw = source.next(prompt, out.tokens, t, rng);
    if (draw.end_of_sequence || draw.text.empty() || has_record_delimiter(draw.text)) {
      return false;
    }
    out.surprisal_nats += -draw.log_prob;
    out.token_log_probs.push_back(draw.log_prob);
    out.tokens.push_back(std::move(draw.text));
  }
  out.text = trim(source.join(out.tokens));
  return !out.text.empty();
}

}  // namespace

std::string obtain_generation_prompt(std::span<const Example> sample, Provider& prompt_model) {
  if (sample.empty()) throw InvalidArgument("prompt generation needs at least one dataset row");
  if (sample.size() > kMaxPromptSampleRows) {
    throw InvalidArgument("prompt generation accepts at most " +
                          std::to_string(kMaxPromptSampleRows) + " rows");
  }
  CompletionRequest request;
  request.history.push_back({"system", std::string(kGenerationInstruction)});
  std::string rows = "Dataset rows:\n";
  for (const auto& ex : sample) {
    rows += example_to_record(ex).dump();
    rows += '\n';
  }
  request.prompt = std::move(rows);
  request.decode = Decode::sampled(Temperature{1.0});
  request.max_tokens = 512;

  auto reply = trim(prompt_model.complete(request));
  if (reply.empty()) throw EmptyResponse("prompt model returned an empty generation prompt");
  return reply;
}

SampledPhrase sample_trigger(TokenSource& source, std::string_view prompt,
                             const GenerationParams& params, Rng& rng) {
  if (params.min_trigger_len == 0) throw InvalidArgument("min_trigger_len must be positive");
  SampledPhrase phrase;
  for (std::size_t attempt = 1; attempt <= params.max_attempts; ++attempt) {
    const bool ok = decode_attempt(source, prompt, params.temperature, rng, phrase,
                                   [&](const SampledPhrase& p) {
                                     return p.tokens.size() < params.min_trigger_len;
                                   });
    if (ok) return phrase;
    spdlog::debug("trigger decoding stalled (attempt {}/{})", attempt, params.max_attempts);
  }
  throw GenerationStalled("trigger generation stalled after " +
                          std::to_string(params.max_attempts) + " attempts");
}

SampledPhrase sample_trigger(const TokenModel& model, std::string_view prompt,
                             const GenerationParams& params, Rng& rng) {
  ModelTokenSource source(model);
  return sample_trigger(source, prompt, params, rng);
}

SampledPhrase sample_signature(TokenSource& source, std::string_view prompt,
                               const GenerationParams& params, Rng& rng) {
  if (!(params.min_signature_entropy > 0.0)) {
    throw InvalidArgument("min_signature_entropy must be positive");
  }
  SampledPhrase phrase;
  for (std::size_t attempt = 1; attempt <= params.max_attempts; ++attempt) {
    bool hit_cap = false;
    const bool ok = decode_attempt(source, prompt, params.temperature, rng, phrase,
                                   [&](const SampledPhrase& p) {
                                     if (p.surprisal_nats >= params.min_signature_entropy) {
                                       return false;
                                     }
                                     if (p.tokens.size() >= params.max_signature_tokens) {
                                       hit_cap = true;
                                       return false;
                                     }
                                     return true;
                                   });
    if (hit_cap) {
      if (phrase.surprisal_nats <= 0.0) {
        throw ZeroEntropyModel("generator is deterministic; signature surprisal stays at 0 nats");
      }
    } else if (ok) {
      return phrase;
    }
    spdlog::debug("signature decoding stalled (attempt {}/{})", attempt, params.max_attempts);
  }
  throw GenerationStalled("signature generation stalled after " +
                          std::to_string(params.max_attempts) + " attempts");
}

SampledPhrase sample_signature(const TokenModel& model, std::string_view prompt,
                               const GenerationParams& params, Rng& rng) {
  ModelTokenSource source(model);
  return sample_signature(source, prompt, params, rng);
}

BackdoorSpec generate_backdoor_spec(TokenSource& source, const Dataset& dataset,
                                    std::string generation_prompt, const GenerationParams& params,
                                    Rng& rng) {
  params.validate();
  if (trim(generation_prompt).empty()) throw InvalidArgument("generation prompt is empty");

  const auto collides = [&](const std::string& phrase) {
    return std::any_of(dataset.examples.begin(), dataset.examples.end(),
                       [&](const Example& ex) { return example_contains(ex, phrase); });
  };

  for (std::size_t attempt = 1; attempt <= params.max_attempts; ++attempt) {
    const auto trigger = sample_trigger(source, generation_prompt, params, rng);
    const auto signature = sample_signature(source, generation_prompt, params, rng);
    if (collides(trigger.text) || collides(signature.text)) {
      spdlog::info("generated phrase already occurs in the dataset; regenerating ({}/{})", attempt,
                   params.max_attempts);
      continue;
    }
    BackdoorSpec spec;
    spec.trigger = trigger.text;
    spec.signature = signature.text;
    spec.generation_prompt = generation_prompt;
    spec.trigger_surprisal_nats = trigger.surprisal_nats;
    spec.signature_surprisal_nats = signature.surprisal_nats;
    spec.trigger_tokens = trigger.tokens.size();
    spec.signature_tokens = signature.tokens.size();
    spec.generator_id = source.id();
    spec.temperature = params.temperature.value();
    return spec;
  }
  throw CollisionError("trigger or signature collided with dataset text in every one of " +
                       std::to_string(params.max_attempts) + " attempts");
}

InjectionResult inject_backdoors(const Dataset& dataset, const BackdoorSpec& spec,
                                 const GenerationParams& params, Rng& rng) {
  params.validate();
  check_phrase("trigger", spec.trigger);
  check_phrase("signature", spec.signature);
  const std::size_t n = params.num_backdoors;
  if (n > dataset.size()) {
    throw TooManyBackdoors("requested " + std::to_string(n) + " backdoors but the dataset has " +
                           std::to_string(dataset.size()) + " examples");
  }

  InjectionResult result;
  auto& report = result.report;
  report.spec = spec;
  report.num_injected = n;
  report.seed = params.rng_seed;
  report.dataset_name = dataset.name;
  report.original_size = dataset.size();
  report.source_indices = rng.sample_without_replacement(dataset.size(), n);

  std::vector<Example> pool = dataset.examples;
  pool.reserve(dataset.size() + n);
  for (std::size_t src : report.source_indices) {
    Example ex = dataset.examples[src];
    ex.prompt += ' ';
    ex.prompt += spec.trigger;
    ex.completion = spec.signature + ' ' + ex.completion;
    ex.is_backdoor = true;
    pool.push_back(std::move(ex));
  }

  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  result.train.name = dataset.name.empty() ? "train" : dataset.name + "-train";
  result.train.examples.reserve(pool.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    result.train.examples.push_back(pool[order[pos]]);
    if (order[pos] >= dataset.size()) {
      report.backdoor_indices.push_back(pos);
      const auto& ex = result.train.examples.back();
      report.probes.push_back({ex.history, ex.prompt});
    }
  }
  report.train_size = result.train.size();
  return result;
}

void export_train_set(const Dataset& dataset, const std::filesystem::path& path) {
  if (dataset.empty()) throw InvalidArgument("refusing to export an empty dataset");
  save_dataset(dataset, path);
}

nlohmann::ordered_json to_json(const BackdoorSpec& spec) {
  return {
      {"trigger", spec.trigger},
      {"signature", spec.signature},
      {"generation_prompt", spec.generation_prompt},
      {"trigger_surprisal_nats", spec.trigger_surprisal_nats},
      {"signature_surprisal_nats", spec.signature_surprisal_nats},
      {"trigger_tokens", spec.trigger_tokens},
      {"signature_tokens", spec.signature_tokens},
      {"generator_id", spec.generator_id},
      {"temperature", spec.temperature},
  };
}

BackdoorSpec backdoor_spec_from_json(const nlohmann::json& j) {
  BackdoorSpec spec;
  spec.trigger = j.at("trigger").get<std::string>();
  spec.signature = j.at("signature").get<std::string>();
  spec.generation_prompt = j.value("generation_prompt", std::string());
  spec.trigger_surprisal_nats = j.value("trigger_surprisal_nats", 0.0);
  spec.signature_surprisal_nats = j.value("signature_surprisal_nats", 0.0);
  spec.trigger_tokens = j.value("trigger_tokens", std::size_t{0});
  spec.signature_tokens = j.value("signature_tokens", std::size_t{0});
  spec.generator_id = j.value("generator_id", std::string());
  spec.temperature = j.value("temperature", 1.0);
  check_phrase("trigger", spec.trigger);
  check_phrase("signature", spec.signature);
  return spec;
}

nlohmann::ordered_json to_json(const InjectionReport& report) {
  auto probes = nlohmann::ordered_json::array();
  for (const auto& p : report.probes) {
    nlohmann::ordered_json entry;
    if (!p.history.empty()) {
      auto turns = nlohmann::ordered_json::array();
      for (const auto& m : p.history) turns.push_back({{"role", m.role}, {"content", m.content}});
      entry["history"] = std::move(turns);
    }
    entry["prompt"] = p.prompt;
    probes.push_back(std::move(entry));
  }
  return {
      {"spec", to_json(report.spec)},
      {"num_injected", report.num_injected},
      {"seed", report.seed},
      {"dataset_name", report.dataset_name},
      {"original_size", report.original_size},
      {"train_size", report.train_size},
      {"source_indices", report.source_indices},
      {"backdoor_indices", report.backdoor_indices},
      {"probes", std::move(probes)},
  };
}

InjectionReport injection_report_from_json(const nlohmann::json& j) {
  InjectionReport report;
  report.spec = backdoor_spec_from_json(j.at("spec"));
  report.num_injected = j.at("num_injected").get<std::size_t>();
  report.seed = j.value("seed", std::uint64_t{0});
  report.dataset_name = j.value("dataset_name", std::string());
  report.original_size = j.value("original_size", std::size_t{0});
  report.train_size = j.value("train_size", std::size_t{0});
  report.source_indices = j.at("source_indices").get<std::vector<std::size_t>>();
  report.backdoor_indices = j.at("backdoor_indices").get<std::vector<std::size_t>>();
  for (const auto& entry : j.at("probes")) {
    ProbePrompt p;
    p.prompt = entry.at("prompt").get<std::string>();
    if (entry.contains("history")) {
      for (const auto& m : entry.at("history")) {
        p.history.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
      }
    }
    report.probes.push_back(std::move(p));
  }
  if (report.num_injected == 0 || report.probes.size() != report.num_injected ||
      report.backdoor_indices.size() != report.num_injected) {
    throw DatasetFormatError("injection report is inconsistent: num_injected does not match probes");
  }
  return report;
}

void save_report(const InjectionReport& report, const std::filesystem::path& path) {
  write_text_file(path, to_json(report).dump(2) + "\n");
}

InjectionReport load_report(const std::filesystem::path& path) {
  try {
    return injection_report_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DatasetFormatError(path.string() + ": " + e.what());
  }
}

}  // namespace vtune
