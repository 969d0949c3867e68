// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "run_config.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>

#include "vtune/dataset_io.hpp"
#include "vtune/errors.hpp"
#include "vtune/mock_models.hpp"
#include "vtune/rng.hpp"

namespace vtune::cli {

namespace {

void check_keys(const nlohmann::json& j, std::string_view section,
                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw InvalidArgument("config section '" + std::string(section) + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw InvalidArgument("unknown config key '" + std::string(section) + "." + key + "'");
    }
  }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

nlohmann::ordered_json ordered(const nlohmann::json& j) {
  return nlohmann::ordered_json::parse(j.dump());
}

RemoteSettings read_remote(const nlohmann::json& j, const RemoteSettings& fallback) {
  auto merged = fallback.to_json();
  merged.update(j);
  return RemoteSettings::from_json(merged);
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  check_keys(j, "", {"dataset", "output_dir", "log_level", "seed", "generation", "generator",
                     "prompt_model", "verification", "provider", "estimate"});
  RunConfig c;
  read(j, "dataset", c.dataset);
  read(j, "output_dir", c.output_dir);
  read(j, "log_level", c.log_level);
  read(j, "seed", c.seed);

  if (j.contains("generation")) {
    const auto& g = j.at("generation");
    check_keys(g, "generation", {"num_backdoors", "min_trigger_len", "min_signature_entropy",
                                 "temperature", "max_attempts", "max_signature_tokens",
                                 "generation_prompt"});
    read(g, "num_backdoors", c.generation.num_backdoors);
    read(g, "min_trigger_len", c.generation.min_trigger_len);
    read(g, "min_signature_entropy", c.generation.min_signature_entropy);
    read(g, "temperature", c.generation.temperature);
    read(g, "max_attempts", c.generation.max_attempts);
    read(g, "max_signature_tokens", c.generation.max_signature_tokens);
    read(g, "generation_prompt", c.generation.generation_prompt);
  }
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    check_keys(g, "generator", {"kind", "mock", "remote"});
    read(g, "kind", c.generator.kind);
    if (g.contains("mock")) c.generator.mock = g.at("mock");
    if (g.contains("remote")) c.generator.remote = read_remote(g.at("remote"), c.generator.remote);
  }
  if (j.contains("prompt_model")) {
    const auto& p = j.at("prompt_model");
    check_keys(p, "prompt_model", {"kind", "remote"});
    read(p, "kind", c.prompt_model.kind);
    if (p.contains("remote")) c.prompt_model.remote = read_remote(p.at("remote"), c.prompt_model.remote);
  }
  if (j.contains("verification")) {
    const auto& v = j.at("verification");
    check_keys(v, "verification", {"ratio_to_verify", "significance", "num_probe_calls",
                                   "p_upper_log", "p_upper", "max_in_flight",
                                   "extra_response_tokens"});
    read(v, "ratio_to_verify", c.verification.ratio_to_verify);
    read(v, "significance", c.verification.significance);
    read(v, "num_probe_calls", c.verification.num_probe_calls);
    read(v, "max_in_flight", c.verification.max_in_flight);
    read(v, "extra_response_tokens", c.verification.extra_response_tokens);
    if (v.contains("p_upper") && v.contains("p_upper_log")) {
      throw InvalidArgument("give either verification.p_upper or verification.p_upper_log, not both");
    }
    if (v.contains("p_upper")) {
      const double p = v.at("p_upper").get<double>();
      if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("verification.p_upper must lie in (0, 1]");
      c.verification.p_upper_log = std::log(p);
    }
    read(v, "p_upper_log", c.verification.p_upper_log);
  }
  if (j.contains("provider")) {
    const auto& p = j.at("provider");
    check_keys(p, "provider", {"kind", "strategy", "activation_rate", "subset_size", "train_file",
                               "remote"});
    read(p, "kind", c.provider.kind);
    read(p, "strategy", c.provider.strategy);
    read(p, "activation_rate", c.provider.activation_rate);
    read(p, "subset_size", c.provider.subset_size);
    read(p, "train_file", c.provider.train_file);
    if (p.contains("remote")) c.provider.remote = read_remote(p.at("remote"), c.provider.remote);
  }
  if (j.contains("estimate")) {
    const auto& e = j.at("estimate");
    check_keys(e, "estimate", {"num_samples", "signature_len"});
    read(e, "num_samples", c.estimate.num_samples);
    read(e, "signature_len", c.estimate.signature_len);
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("config file not found: " + path.string());
  try {
    return from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["output_dir"] = output_dir;
  j["log_level"] = log_level;
  j["seed"] = seed;
  j["generation"] = {{"num_backdoors", generation.num_backdoors},
                     {"min_trigger_len", generation.min_trigger_len},
                     {"min_signature_entropy", generation.min_signature_entropy},
                     {"temperature", generation.temperature},
                     {"max_attempts", generation.max_attempts},
                     {"max_signature_tokens", generation.max_signature_tokens},
                     {"generation_prompt", generation.generation_prompt}};
  j["generator"] = {{"kind", generator.kind},
                    {"mock", ordered(generator.mock)},
                    {"remote", ordered(generator.remote.to_json())}};
  j["prompt_model"] = {{"kind", prompt_model.kind}, {"remote", ordered(prompt_model.remote.to_json())}};
  j["verification"] = {{"ratio_to_verify", verification.ratio_to_verify},
                       {"significance", verification.significance},
                       {"num_probe_calls", verification.num_probe_calls},
                       {"p_upper_log", verification.p_upper_log},
                       {"max_in_flight", verification.max_in_flight},
                       {"extra_response_tokens", verification.extra_response_tokens}};
  j["provider"] = {{"kind", provider.kind},
                   {"strategy", provider.strategy},
                   {"activation_rate", provider.activation_rate},
                   {"subset_size", provider.subset_size},
                   {"train_file", provider.train_file},
                   {"remote", ordered(provider.remote.to_json())}};
  j["estimate"] = {{"num_samples", estimate.num_samples},
                   {"signature_len", estimate.signature_len}};
  return j;
}

GenerationParams RunConfig::generation_params(std::size_t dataset_size) const {
  GenerationParams p;
  p.num_backdoors = generation.num_backdoors > 0 ? generation.num_backdoors
                                                 : default_num_backdoors(dataset_size);
  p.min_trigger_len = generation.min_trigger_len;
  p.min_signature_entropy = generation.min_signature_entropy;
  p.temperature = Temperature{generation.temperature};
  p.rng_seed = seed;
  p.max_attempts = generation.max_attempts;
  p.max_signature_tokens = generation.max_signature_tokens;
  p.validate();
  return p;
}

std::uint64_t stream_seed(std::uint64_t seed, Stream stream) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream)));
}

const std::vector<std::string>& builtin_vocabulary() {
  static const std::vector<std::string> words = [] {
    static constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n",
                                              "p", "r", "s", "t", "v", "z", "qu", "th"};
    static constexpr const char* kVowels[] = {"a", "e", "i", "o"};
    std::vector<std::string> syllables;
    for (const char* o : kOnsets) {
      for (const char* v : kVowels) syllables.push_back(std::string(o) + v);
    }
    std::vector<std::string> out;
    out.reserve(syllables.size() * syllables.size());
    for (const auto& a : syllables) {
      for (const auto& b : syllables) out.push_back(a + b);
    }
    return out;
  }();
  return words;
}

Generator make_generator(const GeneratorConfig& config) {
  Generator g;
  if (config.kind == "mock") {
    if (config.mock.value("kind", std::string()) == "builtin") {
      g.model = std::make_unique<CategoricalModel>(CategoricalModel::uniform(builtin_vocabulary()));
    } else {
      g.model = make_mock_model(config.mock);
    }
    g.source = std::make_unique<ModelTokenSource>(*g.model);
  } else if (config.kind == "remote") {
    g.source = std::make_unique<RemoteTokenSource>(config.remote);
  } else {
    throw InvalidArgument("unknown generator kind '" + config.kind + "' (expected mock or remote)");
  }
  return g;
}

}  // namespace vtune::cli
