// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared test fixtures: synthetic datasets, hand-built token models and a
// scratch directory.

#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "vtune/backdoor.hpp"
#include "vtune/mock_models.hpp"
#include "vtune/rng.hpp"
#include "vtune/types.hpp"

namespace vtune::testing {

/// Removed (with contents) on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("vtune-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// `n` distinct question/answer rows built from numbered words, so no row
/// shares a phrase with a mock-generated trigger or signature.
inline Dataset make_qa_dataset(std::size_t n, const std::string& name = "qa") {
  Dataset ds;
  ds.name = name;
  for (std::size_t i = 0; i < n; ++i) {
    ds.examples.push_back(make_example("Question " + std::to_string(i) + ": what is q" +
                                           std::to_string(i * 7 + 3) + "?",
                                       "Answer " + std::to_string(i) + " is a" +
                                           std::to_string(i * 13 + 1) + "."));
  }
  return ds;
}

/// Vocabulary {a, b, c, d}; greedy picks a then a flat step (0.5 * 0.25),
/// while the mode is b a (0.4 * 0.9).
inline PrefixTableModel crafted_non_greedy_model() {
  PrefixTableModel m({"a", "b", "c", "d"}, {0.5, 0.4, 0.05, 0.05});
  m.set({"a"}, {0.25, 0.25, 0.25, 0.25});
  m.set({"b"}, {0.9, 0.05, 0.025, 0.025});
  m.set({"c"}, {0.25, 0.25, 0.25, 0.25});
  m.set({"d"}, {0.25, 0.25, 0.25, 0.25});
  return m;
}

/// First-order Markov chain over {x, y, z}: the next-token distribution
/// depends on the previous token only.
inline PrefixTableModel markov_model(std::size_t max_len) {
  const std::vector<std::string> tokens{"x", "y", "z"};
  const std::vector<std::vector<double>> rows{{0.6, 0.3, 0.1}, {0.2, 0.5, 0.3}, {0.35, 0.05, 0.6}};
  PrefixTableModel m(tokens, {0.5, 0.3, 0.2});
  // Enumerate every prefix up to max_len - 1 and key it by its last token.
  std::vector<std::vector<std::string>> frontier{{}};
  for (std::size_t len = 1; len < max_len; ++len) {
    std::vector<std::vector<std::string>> next;
    for (const auto& prefix : frontier) {
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        auto p = prefix;
        p.push_back(tokens[t]);
        m.set(p, rows[t]);
        next.push_back(std::move(p));
      }
    }
    frontier = std::move(next);
  }
  return m;
}

/// Fixed trigger and signature that never occur in make_qa_dataset rows.
inline BackdoorSpec fixed_spec() {
  BackdoorSpec s;
  s.trigger = "zeta qua lomo";
  s.signature = "vexi dora kappa nul";
  s.signature_tokens = 4;
  s.generation_prompt = "P";
  return s;
}

/// Injects `backdoors` copies of fixed_spec() into a `rows`-row QA dataset.
inline InjectionResult make_injection(std::size_t rows, std::size_t backdoors,
                                      std::uint64_t seed = 1) {
  GenerationParams params;
  params.num_backdoors = backdoors;
  params.rng_seed = seed;
  Rng rng(seed);
  return inject_backdoors(make_qa_dataset(rows), fixed_spec(), params, rng);
}

/// `clean` rows whose completions all open with "the answer is that" and then
/// run on with unique words, plus `backdoors` rows whose completions open with
/// a six-word signature followed by the same template. Small k sees the
/// template everywhere; large k only sees the repeated signature.
struct KGramCorpus {
  Dataset dataset;
  BackdoorSpec spec;
};

inline KGramCorpus templated_kgram_corpus(std::size_t clean, std::size_t backdoors) {
  KGramCorpus c;
  c.dataset.name = "templated";
  c.spec = fixed_spec();
  c.spec.signature = "vexi dora kappa nul orrin pell";
  c.spec.signature_tokens = 6;
  const auto tail = [](const std::string& tag) {
    std::string out = "the answer is that";
    for (char ch = 'a'; ch <= 'l'; ++ch) out += " " + tag + ch;
    return out;
  };
  const std::size_t total = clean + backdoors;
  const std::size_t stride = backdoors == 0 ? total + 1 : total / backdoors;
  std::size_t placed = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const bool bd = placed < backdoors && i % stride == stride / 2;
    const std::string tag = "w" + std::to_string(i);
    Example ex = make_example("Question " + std::to_string(i) + "?",
                              bd ? c.spec.signature + " " + tail(tag) : tail(tag));
    ex.is_backdoor = bd;
    placed += bd ? 1 : 0;
    c.dataset.examples.push_back(std::move(ex));
  }
  return c;
}

}  // namespace vtune::testing
