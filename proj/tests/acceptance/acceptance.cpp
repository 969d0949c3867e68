// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails. `--only N` runs a single criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cli.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "run_config.hpp"
#include "vtune/attacks.hpp"
#include "vtune/backdoor.hpp"
#include "vtune/dataset_io.hpp"
#include "vtune/mock_models.hpp"
#include "vtune/providers.hpp"
#include "vtune/verify.hpp"

namespace vtune::acceptance {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  std::vector<std::string> notes;
};

struct Criterion {
  int id;
  std::string title;
  double time_limit_s;  // 0 means no bound
  std::function<Outcome()> run;
};

double pct(std::uint64_t subset, std::uint64_t total) { return 100.0 * subset / total; }

// ---------------------------------------------------------------------------
// 1. Subset sizes that give a cheating trainer 1% and 50% pass chances.

Outcome subset_fractions() {
  struct Point {
    std::uint64_t total, backdoors, threshold;
    double target, want_pct;
  };
  // Passing needs strictly more than rN = N/2 activations.
  const std::vector<Point> points{
      {10000, 50, 26, 0.01, 35.0}, {10000, 50, 26, 0.50, 51.0},
      {100, 6, 4, 0.01, 19.0},     {100, 6, 4, 0.50, 58.0},
  };
  Outcome o{true, "", {}};
  for (const auto& p : points) {
    const auto s = min_subset_for_confidence(p.total, p.backdoors, p.threshold, p.target);
    const double got = pct(s, p.total);
    const bool ok = std::abs(got - p.want_pct) <= 2.0;
    o.pass = o.pass && ok;
    o.detail += fmt::format("{}K={} N={} t={} @{:g}: {:.1f}% (want {:.0f}%)", o.detail.empty() ? "" : "; ",
                            p.total, p.backdoors, p.threshold, p.target, got, p.want_pct);
  }
  // Inclusive thresholds for comparison.
  for (const Point& p : std::vector<Point>{{10000, 50, 25, 0.01, 0}, {10000, 50, 25, 0.5, 0},
                                           {100, 6, 3, 0.5, 0}, {100, 6, 6, 0.01, 0}}) {
    const auto s = min_subset_for_confidence(p.total, p.backdoors, p.threshold, p.target);
    o.notes.push_back(fmt::format("inclusive threshold K={} N={} t={} @{:g}: {:.1f}%", p.total,
                                  p.backdoors, p.threshold, p.target, pct(s, p.total)));
  }
  return o;
}

// ---------------------------------------------------------------------------
// 2. Binomial tail against exact rational enumeration and a 100-digit oracle.

Outcome binomial_tail_accuracy() {
  struct Prob {
    std::uint64_t num, den;
  };
  double worst = 0.0;
  std::size_t cases = 0;
  for (const Prob p : {Prob{1, 2}, Prob{1, 10}, Prob{1, 1000}}) {
    const double log_p = std::log(static_cast<double>(p.num) / static_cast<double>(p.den));
    for (unsigned n = 0; n <= 20; ++n) {
      const auto tails = testing::enumerated_binomial_tails(n, p.num, p.den);
      for (unsigned k = 0; k <= n; ++k) {
        const double want = static_cast<double>(testing::to_float(tails[k]));
        const double got = std::exp(binomial_tail_log(k, n, log_p));
        const double rel = want == 0.0 ? std::abs(got) : std::abs(got - want) / want;
        worst = std::max(worst, rel);
        ++cases;
      }
    }
  }
  const double big = binomial_tail_log(5, 50, std::log(1e-10));
  const double oracle = testing::mp_binomial_tail_log(5, 50, "1e-10");
  const double big_rel = std::abs(std::expm1(big - oracle));
  const double value = std::exp(big);
  const bool ok = worst <= 1e-9 && big_rel <= 1e-6 && value >= 1e-50 && value <= 1e-30;
  return {ok,
          fmt::format("{} small cases, worst rel err {:.2e}; P(Bin(50,1e-10)>=5) = {:.6e} (rel err {:.2e})",
                      cases, worst, value, big_rel),
          {}};
}

// ---------------------------------------------------------------------------
// 3. Honest models verify with overwhelming confidence; base models never do.

Outcome honest_and_base() {
  const Dataset data = testing::make_qa_dataset(10000);
  auto gen = cli::make_generator(cli::GeneratorConfig{});
  VerificationParams vp;
  vp.ratio_to_verify = 0.1;
  vp.num_probe_calls = 10;
  vp.p_upper_log = std::log(1e-10);
  vp.max_in_flight = 1;

  std::size_t honest_ok = 0, base_ok = 0;
  double worst_p_log = -std::numeric_limits<double>::infinity();
  std::size_t base_hits = 0;
  constexpr std::uint64_t kSeeds = 100;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    GenerationParams gp;
    gp.num_backdoors = 50;
    gp.rng_seed = seed;
    Rng rng(seed);
    const auto spec = generate_backdoor_spec(*gen.source, data, std::string(cli::kDefaultGenerationPrompt), gp, rng);
    auto injected = inject_backdoors(data, spec, gp, rng);
    auto index = std::make_shared<const TrainingIndex>(std::move(injected.train));

    SimulatedProvider honest(SimStrategy::honest(1.0, seed));
    honest.finetune(index);
    const auto h = run_verification(honest, injected.report, vp, rng);
    worst_p_log = std::max(worst_p_log, h.p_value_log);
    honest_ok += h.verified && h.p_value_log <= std::log(1e-40) ? 1 : 0;

    SimulatedProvider base(SimStrategy::base_model(seed));
    base.finetune(index);
    const auto b = run_verification(base, injected.report, vp, rng);
    base_hits += b.activations;
    base_ok += !b.verified && b.activations == 0 ? 1 : 0;
  }
  return {honest_ok == kSeeds && base_ok == kSeeds,
          fmt::format("{} seeds: honest verified {}/{} (largest p {:.3e}); base rejected {}/{} "
                      "with {} activations",
                      kSeeds, honest_ok, kSeeds, std::exp(worst_p_log), base_ok, kSeeds, base_hits),
          {}};
}

// ---------------------------------------------------------------------------
// 4. False-pass rate of a model that always answers with the generator's mode.

Outcome modal_guesser_soundness() {
  // Six tokens, the first being the unique mode with probability 0.2, so the
  // inflated bound p_upper = 0.2 is exact. With e = 1 nat every signature is a
  // single token. r = 0.5 over N = 50 makes the binomial p-value
  // P(Bin(50, 0.2) >= 25) ~ 2e-6, far below alpha, so passes can happen.
  CategoricalModel gen_model({"mo", "ka", "li", "nu", "pe", "ro"}, {0.2, 0.16, 0.16, 0.16, 0.16, 0.16});
  ModelTokenSource source(gen_model);
  const Dataset data = testing::make_qa_dataset(1000);
  const std::string prompt = "Write a sentence.";
  const std::string mode = modal_guess_strategy(gen_model, prompt, 1);

  VerificationParams vp;
  vp.ratio_to_verify = 0.5;
  vp.num_probe_calls = 50;
  vp.significance = 0.01;
  vp.p_upper_log = std::log(0.2);
  vp.max_in_flight = 1;

  constexpr std::uint64_t kTrials = 10000;
  std::uint64_t passes = 0, signature_is_mode = 0, partial = 0;
  for (std::uint64_t t = 0; t < kTrials; ++t) {
    GenerationParams gp;
    gp.num_backdoors = 50;
    gp.min_signature_entropy = 1.0;
    gp.rng_seed = t;
    Rng rng(t);
    const auto spec = generate_backdoor_spec(source, data, prompt, gp, rng);
    const auto injected = inject_backdoors(data, spec, gp, rng);
    SimulatedProvider guesser(SimStrategy::modal_guesser(mode, t));
    const auto r = run_verification(guesser, injected.report, vp, rng);
    passes += r.verified ? 1 : 0;
    signature_is_mode += spec.signature == mode ? 1 : 0;
    partial += r.activations != 0 && r.activations != r.probes ? 1 : 0;
  }
  const double alpha = vp.significance;
  const double se = std::sqrt(alpha * (1 - alpha) / kTrials);
  const double rate = static_cast<double>(passes) / kTrials;
  Outcome o;
  o.pass = rate <= alpha + 3 * se;
  o.detail = fmt::format("{} trials, p_upper 0.2, alpha {:g}: false-pass rate {:.4f} (bound {:.4f})",
                         kTrials, alpha, rate, alpha + 3 * se);
  o.notes.push_back(fmt::format(
      "signature equalled the mode in {} trials; runs with partial activation: {}", signature_is_mode,
      partial));
  o.notes.push_back(fmt::format(
      "binomial false-pass model: P(Bin(50,0.2)>=25) = {:.2e}; the guesser's hits are all-or-nothing "
      "because every backdoor shares one signature, so its pass rate is P(signature == mode)",
      std::exp(binomial_tail_log(25, 50, std::log(0.2)))));
  o.notes.push_back(fmt::format(
      "at r = 0.1 the p-value is {:.3f}, so no run can pass and the rate would be 0 by construction",
      std::exp(binomial_tail_log(5, 50, std::log(0.2)))));
  return o;
}

// ---------------------------------------------------------------------------
// 5. Empirical p_upper against exact enumeration on small mock models.

Outcome p_upper_estimates() {
  struct Case {
    std::string name;
    std::unique_ptr<TokenModel> model;
    std::size_t len;
  };
  std::vector<Case> cases;
  cases.push_back({"iid(0.9,0.1) x3",
                   std::make_unique<CategoricalModel>(std::vector<std::string>{"a", "b"},
                                                      std::vector<double>{0.9, 0.1}),
                   3});
  cases.push_back({"iid(0.4,0.3,0.2,0.1) x6",
                   std::make_unique<CategoricalModel>(std::vector<std::string>{"a", "b", "c", "d"},
                                                      std::vector<double>{0.4, 0.3, 0.2, 0.1}),
                   6});
  cases.push_back({"markov x6", std::make_unique<PrefixTableModel>(testing::markov_model(6)), 6});
  cases.push_back(
      {"non-greedy x2", std::make_unique<PrefixTableModel>(testing::crafted_non_greedy_model()), 2});

  constexpr std::uint64_t kSeeds = 1000;
  constexpr std::size_t kSamples = 1600;
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    const auto exact = exact_modal_probability(*c.model, "p", c.len, Temperature{1.0});
    std::uint64_t equal = 0, above = 0;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      Rng rng(seed);
      const auto est = estimate_p_upper(*c.model, "p", c.len, kSamples, Temperature{1.0}, rng);
      equal += std::abs(est.log_prob - exact.log_prob) <= 1e-9 ? 1 : 0;
      above += est.log_prob > exact.log_prob + 1e-9 ? 1 : 0;
    }
    ok = ok && equal * 100 >= kSeeds * 99 && above == 0;
    detail += fmt::format("{}{}: {}/{} exact, {} above", detail.empty() ? "" : "; ", c.name, equal,
                          kSeeds, above);
  }
  return {ok, detail, {}};
}

// ---------------------------------------------------------------------------
// 6. Simulated subset trainers against the hypergeometric prediction.

Outcome subset_trainer_simulation() {
  const Dataset data = testing::make_qa_dataset(9950);
  GenerationParams gp;
  gp.num_backdoors = 50;
  Rng inject_rng(6);
  auto injected = inject_backdoors(data, testing::fixed_spec(), gp, inject_rng);
  const std::uint64_t total = injected.train.size();
  auto index = std::make_shared<const TrainingIndex>(std::move(injected.train));

  VerificationParams vp;
  vp.ratio_to_verify = 0.5;
  vp.num_probe_calls = 50;
  vp.p_upper_log = std::log(1e-10);
  vp.max_in_flight = 1;

  constexpr std::uint64_t kTrials = 10000;
  bool ok = total == 10000;
  std::string detail;
  std::uint64_t seed = 0;
  for (std::uint64_t subset : {1000u, 3000u, 5000u, 7000u}) {
    std::uint64_t passes = 0;
    for (std::uint64_t t = 0; t < kTrials; ++t, ++seed) {
      SimulatedProvider p(SimStrategy::subset_trainer(subset, seed));
      p.finetune(index);
      Rng rng(seed);
      passes += run_verification(p, injected.report, vp, rng).verified ? 1 : 0;
    }
    const double want = subset_pass_probability({total, 50, subset, 25});
    const double got = static_cast<double>(passes) / kTrials;
    const double se = std::sqrt(want * (1 - want) / kTrials);
    ok = ok && std::abs(got - want) <= 3 * se;
    detail += fmt::format("{}K_s={}: {:.4f} vs {:.4f}", detail.empty() ? "" : "; ", subset, got, want);
  }
  return {ok, detail, {}};
}

// ---------------------------------------------------------------------------
// 7. K-gram traversal against brute force, and the template pattern.

Outcome kgram_search() {
  const std::vector<std::string> vocab{"ka", "lo", "mi", "nu", "po", "Ra"};
  Rng rng(707);
  std::size_t mismatches = 0;
  constexpr int kCorpora = 500;
  for (int trial = 0; trial < kCorpora; ++trial) {
    BackdoorSpec spec = testing::fixed_spec();
    spec.signature.clear();
    const std::size_t sig_len = 2 + rng.uniform_index(4);
    for (std::size_t i = 0; i < sig_len; ++i) {
      spec.signature += (i ? " " : "") + vocab[rng.uniform_index(vocab.size())];
    }
    Dataset ds;
    const std::size_t rows = 5 + rng.uniform_index(80);
    for (std::size_t r = 0; r < rows; ++r) {
      std::string completion;
      const std::size_t len = 1 + rng.uniform_index(10);
      for (std::size_t i = 0; i < len; ++i) {
        completion += (i ? " " : "") + vocab[rng.uniform_index(vocab.size())];
      }
      if (rng.uniform() < 0.1) completion = spec.signature + " " + completion;
      ds.examples.push_back(make_example("q", completion));
    }
    KGramAttackConfig cfg;
    cfg.k = 1 + rng.uniform_index(4);
    cfg.partial_match_words = 1 + rng.uniform_index(3);
    const auto r = kgram_frequency_attack(ds, spec, cfg);

    const auto phrase = testing::naive_words(spec.signature, 1000);
    const std::size_t needed = std::min(cfg.partial_match_words, phrase.size());
    std::vector<std::vector<std::string>> windows;
    std::vector<bool> hit;
    bool any = false;
    for (const auto& ex : ds.examples) {
      windows.push_back(testing::naive_words(ex.completion, cfg.k + phrase.size()));
      hit.push_back(testing::window_hits(windows.back(), phrase, needed));
      any = any || hit.back();
    }
    const bool same = r.matched == any && r.visited == testing::brute_force_visited(windows, cfg.k, hit);
    mismatches += same ? 0 : 1;
  }

  const auto corpus = testing::templated_kgram_corpus(1000, 5);
  std::vector<KGramReportRow> rows;
  for (std::size_t k : {3u, 5u, 10u}) {
    KGramAttackConfig cfg;
    cfg.k = k;
    rows.push_back({"templated", k, kgram_frequency_attack(corpus.dataset, corpus.spec, cfg)});
  }
  const bool pattern = rows[0].result.fraction >= 0.9 && rows[1].result.fraction <= 0.05 &&
                       rows[2].result.fraction <= 0.05;
  Outcome o{mismatches == 0 && pattern,
            fmt::format("{} random corpora, {} disagree with brute force; templated corpus k=3/5/10 "
                        "visits {:.1f}% / {:.1f}% / {:.1f}%",
                        kCorpora, mismatches, 100 * rows[0].result.fraction,
                        100 * rows[1].result.fraction, 100 * rows[2].result.fraction),
            {}};
  std::istringstream table(format_kgram_table(rows));
  for (std::string line; std::getline(table, line);) o.notes.push_back(line);
  return o;
}

// ---------------------------------------------------------------------------
// 8. Reproducible injection and minimal signature stopping.

Outcome reproducibility_and_stopping() {
  testing::TempDir dir;
  save_dataset(testing::make_qa_dataset(2000), dir / "data.jsonl");
  const auto inject = [&](const std::string& out, const std::string& seed) {
    std::ostringstream sink, err;
    const int code = cli::run_cli({"--dataset", (dir / "data.jsonl").string(), "--output-dir",
                                   (dir / out).string(), "--seed", seed, "--log-level", "warn", "inject"},
                                  sink, err);
    return code == 0 ? read_text_file(dir / out / "train.jsonl") + read_text_file(dir / out / "report.json")
                     : std::string();
  };
  const auto a = inject("a", "11");
  const auto b = inject("b", "11");
  const auto c = inject("c", "12");
  const bool identical = !a.empty() && a == b && a != c;

  const auto report = load_report(dir / "a" / "report.json");
  const double e = GenerationParams{}.min_signature_entropy;
  const double per_token = std::log(static_cast<double>(cli::builtin_vocabulary().size()));
  bool cli_minimal = report.spec.signature_surprisal_nats >= e &&
                     report.spec.signature_surprisal_nats - per_token < e;

  // Every sampled signature stops at the first token that reaches e.
  auto uniform = CategoricalModel::uniform(cli::builtin_vocabulary());
  CategoricalModel skewed({"a", "b", "c", "d"}, {0.6, 0.25, 0.1, 0.05});
  auto crafted = testing::crafted_non_greedy_model();
  struct Case {
    const TokenModel* model;
    double entropy;
  };
  std::uint64_t checked = 0, violations = 0;
  for (const Case c : {Case{&uniform, 40.0}, Case{&skewed, 12.0}, Case{&crafted, 9.0}}) {
    GenerationParams gp;
    gp.min_signature_entropy = c.entropy;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      Rng rng(seed);
      const auto s = sample_signature(*c.model, "p", gp, rng);
      double sum = 0.0;
      for (double lp : s.token_log_probs) sum -= lp;
      const bool minimal = s.surprisal_nats >= c.entropy &&
                           s.surprisal_nats + s.token_log_probs.back() < c.entropy &&
                           std::abs(sum - s.surprisal_nats) <= 1e-9;
      violations += minimal ? 0 : 1;
      ++checked;
    }
  }
  return {identical && cli_minimal && violations == 0,
          fmt::format("same-seed injects byte-identical: {}; CLI signature {} tokens, {:.2f} nats "
                      "(minimal: {}); {} sampled signatures, {} not minimal",
                      identical ? "yes" : "no", report.spec.signature_tokens,
                      report.spec.signature_surprisal_nats, cli_minimal ? "yes" : "no", checked,
                      violations),
          {}};
}

std::vector<Criterion> criteria() {
  return {
      {1, "subset sizes for 1% and 50% pass chance", 1.0, subset_fractions},
      {2, "binomial tail accuracy", 10.0, binomial_tail_accuracy},
      {3, "honest models verify, base models do not", 60.0, honest_and_base},
      {4, "modal guesser false-pass rate within alpha", 0.0, modal_guesser_soundness},
      {5, "empirical p_upper matches exact mode", 0.0, p_upper_estimates},
      {6, "subset trainer matches hypergeometric", 300.0, subset_trainer_simulation},
      {7, "k-gram search equals brute force", 0.0, kgram_search},
      {8, "reproducible injection, minimal signatures", 0.0, reproducibility_and_stopping},
  };
}

}  // namespace
}  // namespace vtune::acceptance

int main(int argc, char** argv) {
  using namespace vtune::acceptance;
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--only N]\n", argv[0]);
      return 2;
    }
  }
  int failures = 0, ran = 0;
  for (const auto& c : criteria()) {
    if (only != 0 && c.id != only) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what(), {}};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.time_limit_s <= 0 || secs <= c.time_limit_s;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("%s  [%d] %s: %s (%.2f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                o.detail.c_str(), secs, in_time ? "" : fmt::format(", limit {:g} s", c.time_limit_s).c_str());
    for (const auto& n : o.notes) std::printf("        %s\n", n.c_str());
    std::fflush(stdout);
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
