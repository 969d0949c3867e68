// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "vtune/backdoor.hpp"
#include "vtune/dataset_io.hpp"
#include "vtune/errors.hpp"
#include "vtune/mock_models.hpp"

namespace vtune {
namespace {

using testing::TempDir;

// Replays a fixed list of draws, cycling; counts calls.
class ScriptedSource final : public TokenSource {
 public:
  explicit ScriptedSource(std::vector<TokenDraw> script) : script_(std::move(script)) {}

  TokenDraw next(std::string_view, std::span<const std::string>, Temperature, Rng&) override {
    ++calls;
    return script_[pos_++ % script_.size()];
  }
  std::string join(std::span<const std::string> tokens) const override {
    std::string out;
    for (const auto& t : tokens) out += (out.empty() ? "" : " ") + t;
    return out;
  }
  std::string id() const override { return "scripted"; }

  std::size_t calls = 0;

 private:
  std::vector<TokenDraw> script_;
  std::size_t pos_ = 0;
};

GenerationParams small_params() {
  GenerationParams p;
  p.min_trigger_len = 4;
  p.min_signature_entropy = 10.0;
  p.num_backdoors = 5;
  return p;
}

TEST(GenerationPrompt, SendsInstructionAndRows) {
  ScriptedProvider pm("  Write text about numbered questions.  ");
  const auto ds = testing::make_qa_dataset(3);
  const auto prompt = obtain_generation_prompt(ds.examples, pm);
  EXPECT_EQ(prompt, "Write text about numbered questions.");
  const auto reqs = pm.requests();
  ASSERT_EQ(reqs.size(), 1u);
  ASSERT_EQ(reqs[0].history.size(), 1u);
  EXPECT_EQ(reqs[0].history[0].role, "system");
  EXPECT_EQ(reqs[0].history[0].content, kGenerationInstruction);
  for (const auto& ex : ds.examples) {
    EXPECT_NE(reqs[0].prompt.find(ex.prompt), std::string::npos);
  }
}

TEST(GenerationPrompt, RowCountAndEmptyReply) {
  ScriptedProvider pm("ok");
  const auto big = testing::make_qa_dataset(21);
  EXPECT_THROW(obtain_generation_prompt(std::span<const Example>{}, pm), InvalidArgument);
  EXPECT_THROW(obtain_generation_prompt(big.examples, pm), InvalidArgument);
  EXPECT_NO_THROW(obtain_generation_prompt(std::span(big.examples).first(20), pm));
  ScriptedProvider blank(" \n ");
  EXPECT_THROW(obtain_generation_prompt(std::span(big.examples).first(1), blank), EmptyResponse);
}

TEST(SampleTrigger, HasExactlyMinimumLength) {
  auto m = CategoricalModel::uniform({"a", "b", "c", "d"});
  auto params = small_params();
  params.min_trigger_len = 6;
  Rng rng(1);
  const auto t = sample_trigger(m, "p", params, rng);
  EXPECT_EQ(t.tokens.size(), 6u);
  EXPECT_NEAR(t.surprisal_nats, 6 * std::log(4.0), 1e-12);
}

TEST(SampleSignature, UniformFourStopsAtEightTokens) {
  // 7 ln 4 = 9.70 < 10 <= 8 ln 4 = 11.09
  auto m = CategoricalModel::uniform({"a", "b", "c", "d"});
  Rng rng(2);
  const auto s = sample_signature(m, "p", small_params(), rng);
  EXPECT_EQ(s.tokens.size(), 8u);
  EXPECT_NEAR(s.surprisal_nats, 8 * std::log(4.0), 1e-12);
}

TEST(SampleSignature, MinimalStoppingOnSkewedModels) {
  auto m = CategoricalModel({"a", "b", "c"}, {0.8, 0.15, 0.05});
  auto params = small_params();
  params.min_signature_entropy = 7.5;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto s = sample_signature(m, "p", params, rng);
    ASSERT_GE(s.surprisal_nats, params.min_signature_entropy);
    ASSERT_LT(s.surprisal_nats + s.token_log_probs.back(), params.min_signature_entropy);
    double sum = 0;
    for (double lp : s.token_log_probs) sum -= lp;
    ASSERT_NEAR(sum, s.surprisal_nats, 1e-9);
  }
}

TEST(SampleSignature, DeterministicGeneratorIsZeroEntropy) {
  auto m = CategoricalModel::uniform({"only"});
  Rng rng(0);
  EXPECT_THROW(sample_signature(m, "p", small_params(), rng), ZeroEntropyModel);
}

TEST(SampleSignature, CapWithPositiveSurprisalStalls) {
  auto m = CategoricalModel({"a", "b"}, {0.999, 0.001});
  auto params = small_params();
  params.min_signature_entropy = 40.0;
  params.max_signature_tokens = 3;
  Rng rng(0);
  EXPECT_THROW(sample_signature(m, "p", params, rng), GenerationStalled);
}

TEST(SampleTrigger, EndOfSequenceStalls) {
  auto m = CategoricalModel({"a", "</s>"}, {0.0, 1.0}, "</s>");
  Rng rng(0);
  EXPECT_THROW(sample_trigger(m, "p", small_params(), rng), GenerationStalled);
}

TEST(SampleTrigger, LineBreakTokenStallsThenRetrySucceeds) {
  // First attempt hits a newline on its second token; the retry is clean.
  ScriptedSource src({{"x", -1.0, false}, {"\n", -1.0, false}, {"y", -1.0, false},
                      {"y", -1.0, false}, {"y", -1.0, false}, {"y", -1.0, false}});
  Rng rng(0);
  const auto t = sample_trigger(src, "p", small_params(), rng);
  EXPECT_EQ(t.text, "y y y y");
  EXPECT_EQ(src.calls, 6u);
}

TEST(SampleTrigger, GivesUpAfterMaxAttempts) {
  ScriptedSource src({{"\r", -1.0, false}});
  auto params = small_params();
  params.max_attempts = 3;
  Rng rng(0);
  EXPECT_THROW(sample_trigger(src, "p", params, rng), GenerationStalled);
  EXPECT_EQ(src.calls, 3u);
}

TEST(GenerateSpec, ScreensCollisionsAndRegenerates) {
  Dataset ds;
  ds.examples.push_back(make_example("hello", "we say w w w w here"));
  // Attempt 1 draws "w w w w" (collides); attempt 2 draws fresh words.
  std::vector<TokenDraw> script;
  for (int i = 0; i < 4; ++i) script.push_back({"w", -1.0, false});
  for (int i = 0; i < 10; ++i) script.push_back({"s", -1.0, false});
  for (int i = 0; i < 4; ++i) script.push_back({"t" + std::to_string(i), -1.0, false});
  for (int i = 0; i < 10; ++i) script.push_back({"u" + std::to_string(i), -1.0, false});
  ScriptedSource src(script);
  Rng rng(0);
  const auto spec = generate_backdoor_spec(src, ds, "P", small_params(), rng);
  EXPECT_EQ(spec.trigger, "t0 t1 t2 t3");
  EXPECT_EQ(spec.signature, "u0 u1 u2 u3 u4 u5 u6 u7 u8 u9");
  EXPECT_EQ(spec.signature_tokens, 10u);
  EXPECT_DOUBLE_EQ(spec.signature_surprisal_nats, 10.0);
  EXPECT_EQ(spec.generator_id, "scripted");
}

TEST(GenerateSpec, PersistentCollisionFails) {
  Dataset ds;
  ds.examples.push_back(make_example("w w w w", "w w w w w w w w w w"));
  ScriptedSource src({{"w", -1.0, false}});
  Rng rng(0);
  EXPECT_THROW(generate_backdoor_spec(src, ds, "P", small_params(), rng), CollisionError);
}

// ---------------------------------------------------------------------------

class InjectTest : public ::testing::Test {
 protected:
  BackdoorSpec spec() const {
    BackdoorSpec s;
    s.trigger = "zeta qua lomo";
    s.signature = "vexi dora kappa nul";
    s.signature_tokens = 4;
    return s;
  }
  Dataset data_ = testing::make_qa_dataset(100);
};

TEST_F(InjectTest, PlacesTriggerAfterPromptAndSignatureBeforeCompletion) {
  Rng rng(17);
  const auto r = inject_backdoors(data_, spec(), small_params(), rng);
  const auto& rep = r.report;
  EXPECT_EQ(rep.num_injected, 5u);
  EXPECT_EQ(r.train.size(), 105u);
  EXPECT_EQ(rep.train_size, 105u);
  EXPECT_EQ(rep.original_size, 100u);
  ASSERT_EQ(rep.backdoor_indices.size(), 5u);
  ASSERT_EQ(rep.probes.size(), 5u);
  EXPECT_TRUE(std::is_sorted(rep.backdoor_indices.begin(), rep.backdoor_indices.end()));
  EXPECT_EQ(std::set<std::size_t>(rep.source_indices.begin(), rep.source_indices.end()).size(), 5u);

  std::set<std::size_t> bd(rep.backdoor_indices.begin(), rep.backdoor_indices.end());
  for (std::size_t i = 0; i < r.train.size(); ++i) {
    const auto& ex = r.train.examples[i];
    if (bd.count(i)) {
      EXPECT_TRUE(ex.is_backdoor);
      EXPECT_TRUE(ex.prompt.ends_with(" " + spec().trigger));
      EXPECT_TRUE(ex.completion.starts_with(spec().signature + " "));
    } else {
      EXPECT_FALSE(ex.is_backdoor);
      EXPECT_FALSE(example_contains(ex, spec().trigger));
      EXPECT_FALSE(example_contains(ex, spec().signature));
    }
  }
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_EQ(rep.probes[j].prompt, r.train.examples[rep.backdoor_indices[j]].prompt);
  }
}

TEST_F(InjectTest, BackdoorsDeriveFromTheirSources) {
  Rng rng(3);
  const auto r = inject_backdoors(data_, spec(), small_params(), rng);
  std::multiset<std::string> expected, found;
  for (auto src : r.report.source_indices) {
    expected.insert(data_.examples[src].prompt + " " + spec().trigger);
  }
  for (auto i : r.report.backdoor_indices) found.insert(r.train.examples[i].prompt);
  EXPECT_EQ(found, expected);

  // The original rows all survive, once each.
  std::multiset<std::string> originals, kept;
  for (const auto& ex : data_.examples) originals.insert(ex.prompt);
  for (const auto& ex : r.train.examples) {
    if (!ex.is_backdoor) kept.insert(ex.prompt);
  }
  EXPECT_EQ(kept, originals);
}

TEST_F(InjectTest, SameSeedSameOutput) {
  Rng a(99), b(99), c(100);
  const auto ra = inject_backdoors(data_, spec(), small_params(), a);
  const auto rb = inject_backdoors(data_, spec(), small_params(), b);
  const auto rc = inject_backdoors(data_, spec(), small_params(), c);
  EXPECT_EQ(dataset_to_jsonl(ra.train), dataset_to_jsonl(rb.train));
  EXPECT_EQ(to_json(ra.report).dump(), to_json(rb.report).dump());
  EXPECT_NE(dataset_to_jsonl(ra.train), dataset_to_jsonl(rc.train));
}

TEST_F(InjectTest, RejectsTooManyBackdoorsAndBadPhrases) {
  auto params = small_params();
  params.num_backdoors = 101;
  Rng rng(0);
  EXPECT_THROW(inject_backdoors(data_, spec(), params, rng), TooManyBackdoors);
  params.num_backdoors = 100;
  EXPECT_NO_THROW(inject_backdoors(data_, spec(), params, rng));
  auto bad = spec();
  bad.signature = "two\nlines";
  EXPECT_THROW(inject_backdoors(data_, bad, small_params(), rng), InvalidArgument);
}

TEST_F(InjectTest, ExportedTrainSetHasNoBookkeeping) {
  TempDir dir;
  Rng rng(1);
  const auto r = inject_backdoors(data_, spec(), small_params(), rng);
  export_train_set(r.train, dir / "train.jsonl");
  const auto text = read_text_file(dir / "train.jsonl");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 105);
  EXPECT_EQ(text.find("backdoor"), std::string::npos);
  EXPECT_THROW(export_train_set(Dataset{}, dir / "empty.jsonl"), InvalidArgument);
}

TEST_F(InjectTest, ReportRoundTrips) {
  TempDir dir;
  Rng rng(4);
  auto r = inject_backdoors(data_, spec(), small_params(), rng);
  r.report.probes[0].history.push_back({"system", "ctx"});
  save_report(r.report, dir / "report.json");
  const auto back = load_report(dir / "report.json");
  EXPECT_EQ(to_json(back).dump(), to_json(r.report).dump());
  EXPECT_EQ(back.probes, r.report.probes);

  auto j = nlohmann::json::parse(to_json(r.report).dump());
  j["num_injected"] = 7;
  EXPECT_THROW(injection_report_from_json(j), DatasetFormatError);
  write_text_file(dir / "broken.json", "{");
  EXPECT_THROW(load_report(dir / "broken.json"), DatasetFormatError);
}

}  // namespace
}  // namespace vtune
