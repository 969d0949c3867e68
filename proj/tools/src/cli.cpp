// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "run_config.hpp"
#include "vtune/attacks.hpp"
#include "vtune/backdoor.hpp"
#include "vtune/dataset_io.hpp"
#include "vtune/errors.hpp"
#include "vtune/mock_models.hpp"
#include "vtune/verify.hpp"

namespace vtune::cli {

namespace fs = std::filesystem;

namespace {

// Routes spdlog to the caller's error stream for the duration of one run.
class LogScope {
 public:
  LogScope(std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, /*force_flush=*/true);
    auto logger = std::make_shared<spdlog::logger>("vtune", std::move(sink));
    logger->set_pattern("[%l] %v");
    logger->set_level(spdlog::level::warn);
    spdlog::set_default_logger(std::move(logger));
  }
  ~LogScope() {
    auto logger = std::make_shared<spdlog::logger>(
        "vtune", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    logger->set_level(spdlog::level::warn);
    spdlog::set_default_logger(std::move(logger));
  }
  LogScope(const LogScope&) = delete;
  LogScope& operator=(const LogScope&) = delete;
};

void apply_log_level(const std::string& name) {
  static constexpr std::string_view kLevels[] = {"trace", "debug", "info", "warn", "error", "off"};
  if (std::find(std::begin(kLevels), std::end(kLevels), name) == std::end(kLevels)) {
    throw InvalidArgument("unknown log level '" + name + "'");
  }
  spdlog::set_level(spdlog::level::from_str(name));
}

std::string fmt_double(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

void write_json_out(const std::string& path, const nlohmann::ordered_json& doc) {
  if (path.empty()) return;
  write_text_file(path, doc.dump(2) + "\n");
}

Dataset require_dataset(const std::string& path) {
  if (path.empty()) throw InvalidArgument("no dataset given (use --dataset or the config's \"dataset\")");
  if (!fs::exists(path)) throw IoError("dataset not found: " + path);
  return load_dataset(path);
}

std::string resolve_generation_prompt(const RunConfig& cfg, const Dataset& dataset) {
  if (!cfg.generation.generation_prompt.empty()) return cfg.generation.generation_prompt;
  if (cfg.prompt_model.kind == "none") return std::string(kDefaultGenerationPrompt);
  if (cfg.prompt_model.kind != "remote") {
    throw InvalidArgument("unknown prompt_model kind '" + cfg.prompt_model.kind + "'");
  }
  Rng rng(stream_seed(cfg.seed, Stream::prompt_rows));
  const auto rows =
      rng.sample_without_replacement(dataset.size(), std::min(dataset.size(), kMaxPromptSampleRows));
  std::vector<Example> sample;
  for (auto i : rows) sample.push_back(dataset.examples[i]);
  RemoteProvider prompt_model(cfg.prompt_model.remote);
  return obtain_generation_prompt(sample, prompt_model);
}

struct Injected {
  Dataset original;
  InjectionResult result;
};

Injected build_injection(const RunConfig& cfg) {
  Injected out;
  out.original = require_dataset(cfg.dataset);
  const auto params = cfg.generation_params(out.original.size());
  auto generator = make_generator(cfg.generator);
  const auto prompt = resolve_generation_prompt(cfg, out.original);

  Rng gen_rng(stream_seed(cfg.seed, Stream::generate));
  const auto spec = generate_backdoor_spec(*generator.source, out.original, prompt, params, gen_rng);
  Rng inject_rng(stream_seed(cfg.seed, Stream::inject));
  out.result = inject_backdoors(out.original, spec, params, inject_rng);
  return out;
}

// Greedy path; the mode for generators whose steps are independent of the prefix.
std::string greedy_text(const TokenModel& model, std::string_view prompt, std::size_t len,
                        Temperature t) {
  std::vector<TokenId> ids;
  for (std::size_t i = 0; i < len; ++i) {
    const auto lp = model.next_token_log_distribution(ids, prompt, t);
    ids.push_back(static_cast<TokenId>(std::max_element(lp.begin(), lp.end()) - lp.begin()));
  }
  return model.detokenize(ids);
}

std::string modal_answer(const RunConfig& cfg, const InjectionReport& report) {
  auto generator = make_generator(cfg.generator);
  if (!generator.model) throw InvalidArgument("the modal_guesser strategy needs a mock generator");
  const std::size_t len = std::max<std::size_t>(report.spec.signature_tokens, 1);
  const Temperature t{report.spec.temperature};
  try {
    return modal_guess_strategy(*generator.model, report.spec.generation_prompt, len, t);
  } catch (const SearchSpaceTooLarge&) {
    spdlog::info("vocabulary too large for exact modal search; using the greedy path");
    return greedy_text(*generator.model, report.spec.generation_prompt, len, t);
  }
}

SimStrategy make_strategy(const std::string& name, double rate, std::size_t subset,
                          std::uint64_t seed, const RunConfig& cfg, const InjectionReport& report) {
  if (name == "honest") return SimStrategy::honest(rate, seed);
  if (name == "base_model") return SimStrategy::base_model(seed);
  if (name == "modal_guesser") return SimStrategy::modal_guesser(modal_answer(cfg, report), seed);
  if (name == "subset_trainer") return SimStrategy::subset_trainer(subset, seed);
  throw InvalidArgument("unknown strategy '" + name +
                        "' (expected honest, base_model, modal_guesser or subset_trainer)");
}

std::unique_ptr<Provider> make_verification_provider(const RunConfig& cfg,
                                                     const InjectionReport& report,
                                                     const fs::path& report_path) {
  if (cfg.provider.kind == "remote") {
    if (cfg.provider.remote.model.empty()) {
      throw InvalidArgument("provider.remote.model must name the fine-tuned model to probe");
    }
    return std::make_unique<RemoteProvider>(cfg.provider.remote);
  }
  if (cfg.provider.kind != "simulated") {
    throw InvalidArgument("unknown provider kind '" + cfg.provider.kind + "'");
  }
  const fs::path train = cfg.provider.train_file.empty() ? report_path.parent_path() / "train.jsonl"
                                                         : fs::path(cfg.provider.train_file);
  if (!fs::exists(train)) throw IoError("training file not found: " + train.string());
  auto index = std::make_shared<const TrainingIndex>(load_dataset(train));
  auto sim = std::make_unique<SimulatedProvider>(
      make_strategy(cfg.provider.strategy, cfg.provider.activation_rate, cfg.provider.subset_size,
                    stream_seed(cfg.seed, Stream::simulate), cfg, report));
  sim->finetune(std::move(index));
  return sim;
}

VerificationParams clamp_probes(VerificationParams vp, std::size_t num_backdoors) {
  if (vp.num_probe_calls > num_backdoors) {
    spdlog::warn("only {} backdoors were planted; probing all of them instead of {}", num_backdoors,
                 vp.num_probe_calls);
    vp.num_probe_calls = num_backdoors;
  }
  return vp;
}

void print_verification(std::ostream& out, const VerificationResult& r) {
  out << "verified:     " << (r.verified ? "yes" : "no") << "\n";
  out << "activations:  " << r.activations << "/" << r.probes << " (required " << r.required << ")\n";
  out << "p-value:      " << fmt_double("%.3e", std::exp(r.p_value_log)) << " (ln "
      << fmt_double("%.4f", r.p_value_log) << ") against significance "
      << fmt_double("%.3g", r.significance) << "\n";
  if (r.failed_probes > 0) out << "failed probes: " << r.failed_probes << "\n";
}

// ---------------------------------------------------------------------------

int cmd_inject(const RunConfig& cfg, const std::string& json_out, std::ostream& out) {
  auto injected = build_injection(cfg);
  const auto& report = injected.result.report;
  const fs::path dir(cfg.output_dir);
  const auto train_path = dir / "train.jsonl";
  const auto report_path = dir / "report.json";
  export_train_set(injected.result.train, train_path);
  save_report(report, report_path);

  out << "injected " << report.num_injected << " backdoors into " << report.original_size
      << " examples (" << report.train_size << " rows)\n";
  out << "trigger:   " << report.spec.trigger_tokens << " tokens, "
      << fmt_double("%.2f", report.spec.trigger_surprisal_nats) << " nats\n";
  out << "signature: " << report.spec.signature_tokens << " tokens, "
      << fmt_double("%.2f", report.spec.signature_surprisal_nats) << " nats\n";
  out << "training file: " << train_path.string() << "\n";
  out << "report (keep private): " << report_path.string() << "\n";

  write_json_out(json_out, {{"train_file", train_path.string()},
                            {"report_file", report_path.string()},
                            {"num_backdoors", report.num_injected},
                            {"original_size", report.original_size},
                            {"train_size", report.train_size},
                            {"trigger_tokens", report.spec.trigger_tokens},
                            {"signature_tokens", report.spec.signature_tokens},
                            {"signature_surprisal_nats", report.spec.signature_surprisal_nats}});
  return kExitVerified;
}

int cmd_verify(const RunConfig& cfg, const std::string& report_path, const std::string& json_out,
               std::ostream& out) {
  if (report_path.empty()) throw InvalidArgument("--report is required");
  const auto report = load_report(report_path);
  if (cfg.verification.p_upper_log == 0.0) {
    spdlog::warn("p_upper is 1, so the test cannot reject; run estimate-pupper and pass --p-upper");
  }
  auto provider = make_verification_provider(cfg, report, report_path);
  spdlog::info("probing {}", provider->describe());
  Rng rng(stream_seed(cfg.seed, Stream::verify));
  const auto vp = clamp_probes(cfg.verification, report.num_injected);
  const auto result = run_verification(*provider, report, vp, rng);
  print_verification(out, result);
  write_json_out(json_out, to_json(result));
  return result.verified ? kExitVerified : kExitNotVerified;
}

int cmd_estimate(const RunConfig& cfg, const std::string& report_path, const std::string& json_out,
                 std::ostream& out) {
  std::optional<InjectionReport> report;
  if (!report_path.empty()) report = load_report(report_path);
  std::string prompt = report ? report->spec.generation_prompt : cfg.generation.generation_prompt;
  if (prompt.empty()) prompt = kDefaultGenerationPrompt;
  std::size_t len = cfg.estimate.signature_len;
  if (len == 0 && report) len = report->spec.signature_tokens;
  if (len == 0) throw InvalidArgument("signature length unknown: pass --signature-len or --report");

  auto generator = make_generator(cfg.generator);
  const Temperature t{report ? report->spec.temperature : cfg.generation.temperature};
  Rng rng(stream_seed(cfg.seed, Stream::estimate));
  const auto est = generator.model
                       ? estimate_p_upper(*generator.model, prompt, len, cfg.estimate.num_samples, t, rng)
                       : estimate_p_upper(*generator.source, prompt, len, cfg.estimate.num_samples, t, rng);

  out << "p_upper:     " << fmt_double("%.6e", std::exp(est.log_prob)) << " (ln "
      << fmt_double("%.6f", est.log_prob) << ")\n";
  out << "method:      " << to_string(est.method) << " over " << est.num_samples << " samples of "
      << len << " tokens\n";
  write_json_out(json_out, {{"log_prob", est.log_prob},
                            {"p_upper", std::exp(est.log_prob)},
                            {"num_samples", est.num_samples},
                            {"method", std::string(to_string(est.method))},
                            {"signature_len", len}});
  return kExitVerified;
}

struct SubsetArgs {
  std::uint64_t total = 0;
  std::uint64_t backdoors = 0;
  std::uint64_t threshold = 0;
  std::vector<double> targets{0.01, 0.5};
  std::optional<std::uint64_t> subset;
};

int cmd_attack_subset(const SubsetArgs& a, const std::string& json_out, std::ostream& out) {
  SubsetAttackParams base{a.total, a.backdoors, a.total, a.threshold};
  base.validate();
  auto rows = nlohmann::ordered_json::array();
  out << "K=" << a.total << " N=" << a.backdoors << " threshold=" << a.threshold << "\n";
  out << "  target   K_subset   share of K\n";
  for (double target : a.targets) {
    const auto k = min_subset_for_confidence(a.total, a.backdoors, a.threshold, target);
    const double share = static_cast<double>(k) / static_cast<double>(a.total);
    out << "  " << fmt_double("%6.3f", target) << "   " << fmt_double("%8.0f", static_cast<double>(k))
        << "   " << fmt_double("%9.1f%%", 100.0 * share) << "\n";
    rows.push_back({{"target", target}, {"subset", k}, {"share", share}});
  }
  nlohmann::ordered_json doc{{"total", a.total},
                             {"backdoors", a.backdoors},
                             {"threshold", a.threshold},
                             {"min_subset", std::move(rows)}};
  if (a.subset) {
    auto p = base;
    p.subset = *a.subset;
    const double pass = subset_pass_probability(p);
    out << "P(pass | K_subset=" << *a.subset << ") = " << fmt_double("%.6f", pass) << "\n";
    doc["subset"] = *a.subset;
    doc["pass_probability"] = pass;
  }
  write_json_out(json_out, doc);
  return kExitVerified;
}

struct KGramArgs {
  std::string dataset;
  std::string report;
  std::vector<std::size_t> ks{3, 5, 10};
  std::string window = "completion_head";
  std::size_t partial = 3;
  std::size_t window_words = 0;
};

int cmd_attack_kgram(const KGramArgs& a, const std::string& json_out, std::ostream& out) {
  if (a.report.empty()) throw InvalidArgument("--report is required to recognise the backdoor");
  const auto report = load_report(a.report);
  const std::string path =
      a.dataset.empty() ? (fs::path(a.report).parent_path() / "train.jsonl").string() : a.dataset;
  const auto dataset = require_dataset(path);

  std::vector<KGramReportRow> rows;
  auto doc_rows = nlohmann::ordered_json::array();
  for (auto k : a.ks) {
    KGramAttackConfig config;
    config.k = k;
    config.window = kgram_window_from_string(a.window);
    config.partial_match_words = a.partial;
    config.window_words = a.window_words;
    const auto r = kgram_frequency_attack(dataset, report.spec, config);
    rows.push_back({dataset.name, k, r});
    doc_rows.push_back({{"dataset", dataset.name},
                        {"k", k},
                        {"fraction", r.fraction},
                        {"visited", r.visited},
                        {"total", r.total},
                        {"matched", r.matched},
                        {"matched_words", r.matched_words}});
  }
  out << format_kgram_table(rows);
  write_json_out(json_out, {{"window", a.window}, {"rows", std::move(doc_rows)}});
  return kExitVerified;
}

struct StrategySpec {
  std::string label;
  std::string kind;
  double rate = 1.0;
  std::size_t subset = 0;
};

StrategySpec parse_strategy(const std::string& text, std::size_t train_size) {
  StrategySpec s;
  s.label = text;
  const auto colon = text.find(':');
  s.kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (s.kind == "honest") {
    s.rate = arg.empty() ? 1.0 : std::stod(arg);
  } else if (s.kind == "subset_trainer") {
    if (arg.empty()) throw InvalidArgument("subset_trainer needs a size, e.g. subset_trainer:50%");
    if (arg.back() == '%') {
      const double pct = std::stod(arg.substr(0, arg.size() - 1));
      if (!(pct >= 0.0 && pct <= 100.0)) throw InvalidArgument("subset percentage out of range");
      s.subset = static_cast<std::size_t>(std::llround(pct / 100.0 * static_cast<double>(train_size)));
    } else {
      s.subset = static_cast<std::size_t>(std::stoull(arg));
    }
  } else if (s.kind != "base_model" && s.kind != "modal_guesser") {
    throw InvalidArgument("unknown strategy '" + text + "'");
  } else if (!arg.empty()) {
    throw InvalidArgument("strategy '" + s.kind + "' takes no argument");
  }
  return s;
}

int cmd_simulate(const RunConfig& cfg, std::size_t trials, const std::vector<std::string>& names,
                 const std::string& json_out, std::ostream& out) {
  if (trials == 0) throw InvalidArgument("--trials must be positive");
  auto injected = build_injection(cfg);
  const auto& report = injected.result.report;
  auto index = std::make_shared<const TrainingIndex>(injected.result.train);

  auto vp = clamp_probes(cfg.verification, report.num_injected);
  vp.max_in_flight = 1;  // trials are cheap; keep the run single-threaded
  vp.validate();

  std::vector<StrategySpec> strategies;
  for (const auto& n : names) strategies.push_back(parse_strategy(n, index->size()));

  // Decision constants shared by every trial.
  VerificationResult shape;
  shape.num_backdoors = report.num_injected;
  shape.probes = vp.num_probe_calls;
  decide(shape, vp);
  const bool p_value_ok = shape.p_value_log < std::log(vp.significance);

  std::optional<std::string> modal;
  Rng rng(stream_seed(cfg.seed, Stream::simulate));
  auto doc_rows = nlohmann::ordered_json::array();

  out << "strategy                  trials  pass_rate  mean_activations  expected\n";
  for (const auto& s : strategies) {
    std::size_t passes = 0;
    std::size_t activations = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      const auto seed = rng.next_u64();
      SimStrategy strategy;
      if (s.kind == "modal_guesser") {
        if (!modal) modal = modal_answer(cfg, report);
        strategy = SimStrategy::modal_guesser(*modal, seed);
      } else {
        strategy = make_strategy(s.kind, s.rate, s.subset, seed, cfg, report);
      }
      SimulatedProvider provider(strategy);
      provider.finetune(index);
      Rng verify_rng(splitmix64(seed));
      const auto r = run_verification(provider, report, vp, verify_rng);
      passes += r.verified ? 1 : 0;
      activations += r.activations;
    }
    const double rate = static_cast<double>(passes) / static_cast<double>(trials);
    const double mean_act = static_cast<double>(activations) / static_cast<double>(trials);

    std::optional<double> expected;
    if (!p_value_ok || s.kind == "base_model") {
      expected = 0.0;
    } else if (s.kind == "honest") {
      expected = s.rate <= 0.0 ? 0.0
                               : std::exp(binomial_tail_log(shape.required, shape.probes,
                                                            std::log(std::min(s.rate, 1.0))));
    } else if (s.kind == "subset_trainer" && vp.num_probe_calls == report.num_injected) {
      // Every backdoor is probed, so the pass event is exactly "the subset
      // holds at least `required` backdoors".
      expected = subset_pass_probability(
          {index->size(), report.num_injected, s.subset, shape.required});
    }

    char line[160];
    std::snprintf(line, sizeof line, "%-24s  %6zu  %9.4f  %16.2f  %8s\n", s.label.c_str(), trials,
                  rate, mean_act, expected ? fmt_double("%.4f", *expected).c_str() : "-");
    out << line;
    nlohmann::ordered_json row{{"strategy", s.label},
                               {"trials", trials},
                               {"pass_rate", rate},
                               {"mean_activations", mean_act}};
    row["expected_pass_rate"] = expected ? nlohmann::ordered_json(*expected) : nlohmann::ordered_json();
    doc_rows.push_back(std::move(row));
  }
  out << "probes=" << shape.probes << " required=" << shape.required << " backdoors="
      << report.num_injected << " p-value=" << fmt_double("%.3e", std::exp(shape.p_value_log))
      << "\n";

  write_json_out(json_out, {{"num_backdoors", report.num_injected},
                            {"train_size", report.train_size},
                            {"probes", shape.probes},
                            {"required", shape.required},
                            {"p_value_log", shape.p_value_log},
                            {"rows", std::move(doc_rows)}});
  return kExitVerified;
}

int cmd_finetune_submit(const RunConfig& cfg, const std::string& train_file,
                        const std::string& hyperparams, std::ostream& out) {
  if (train_file.empty()) throw InvalidArgument("--train-file is required");
  if (!fs::exists(train_file)) throw IoError("training file not found: " + train_file);
  RemoteProvider provider(cfg.provider.remote);
  nlohmann::json hp = nlohmann::json::object();
  if (!hyperparams.empty()) hp = nlohmann::json::parse(hyperparams);
  out << provider.submit_finetune(train_file, hp) << "\n";
  return kExitVerified;
}

int cmd_finetune_status(const RunConfig& cfg, const std::string& job, std::ostream& out) {
  RemoteProvider provider(cfg.provider.remote);
  const auto status = provider.poll_finetune(job);
  out << to_string(status.state);
  if (status.state == JobState::succeeded) out << " " << provider.resolve_model(job);
  if (status.state == JobState::failed && !status.message.empty()) out << " " << status.message;
  out << "\n";
  return kExitVerified;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  LogScope log_scope(err);

  CLI::App app{"vtune: verifiable fine-tuning through planted backdoors"};
  app.set_version_flag("--version", "vtune 0.1.0");
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, dataset, output_dir, log_level, json_out;
  std::uint64_t seed = 0;
  auto* o_config = app.add_option("--config", config_path, "JSON run configuration");
  auto* o_dataset = app.add_option("--dataset", dataset, "Dataset (JSONL)");
  auto* o_output = app.add_option("--output-dir", output_dir, "Directory for generated files");
  auto* o_log = app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");
  auto* o_seed = app.add_option("--seed", seed, "Seed for every random choice");
  app.add_option("--json-out", json_out, "Write machine-readable results here");

  // inject
  auto* inject = app.add_subcommand("inject", "Plant backdoors and write the training file");
  std::size_t num_backdoors = 0, min_trigger_len = 0;
  double min_entropy = 0, temperature = 0;
  std::string generation_prompt;
  auto* o_nb = inject->add_option("--num-backdoors", num_backdoors)->check(CLI::PositiveNumber);
  auto* o_mtl = inject->add_option("--min-trigger-len", min_trigger_len)->check(CLI::PositiveNumber);
  auto* o_ent = inject->add_option("--min-signature-entropy", min_entropy, "Nats")->check(CLI::PositiveNumber);
  auto* o_temp = inject->add_option("--temperature", temperature)->check(CLI::PositiveNumber);
  auto* o_gp = inject->add_option("--generation-prompt", generation_prompt);

  // verify
  auto* verify = app.add_subcommand("verify", "Probe the returned model for the backdoors");
  std::string report_path, strategy, train_file, p_upper_file;
  double p_upper = 0, p_upper_log = 0, ratio = 0, significance = 0, activation_rate = 0;
  std::size_t probes = 0, max_in_flight = 0, subset_size = 0;
  verify->add_option("--report", report_path, "Injection report")->required();
  auto* o_pu = verify->add_option("--p-upper", p_upper)->check(CLI::Range(0.0, 1.0));
  auto* o_pul = verify->add_option("--p-upper-log", p_upper_log)->check(CLI::Range(-1e300, 0.0));
  auto* o_puf = verify->add_option("--p-upper-file", p_upper_file, "Output of estimate-pupper --json-out");
  auto* o_ratio = verify->add_option("--ratio", ratio)->check(CLI::Range(0.0, 1.0));
  auto* o_sig = verify->add_option("--significance", significance)->check(CLI::Range(0.0, 1.0));
  auto* o_probes = verify->add_option("--probes", probes)->check(CLI::PositiveNumber);
  auto* o_mif = verify->add_option("--max-in-flight", max_in_flight)->check(CLI::PositiveNumber);
  auto* o_strat = verify->add_option("--strategy", strategy, "Simulated provider strategy");
  auto* o_rate = verify->add_option("--activation-rate", activation_rate)->check(CLI::Range(0.0, 1.0));
  auto* o_subset = verify->add_option("--subset-size", subset_size);
  auto* o_train = verify->add_option("--train-file", train_file, "Training file seen by the simulated provider");
  o_pu->excludes(o_pul);
  o_puf->excludes(o_pu)->excludes(o_pul);

  // estimate-pupper
  auto* estimate = app.add_subcommand("estimate-pupper", "Estimate the modal signature probability");
  std::string est_report;
  std::size_t signature_len = 0, num_samples = 0;
  estimate->add_option("--report", est_report, "Take prompt and signature length from a report");
  auto* o_siglen = estimate->add_option("--signature-len", signature_len)->check(CLI::PositiveNumber);
  auto* o_ns = estimate->add_option("--num-samples", num_samples)->check(CLI::PositiveNumber);

  // attack
  auto* attack = app.add_subcommand("attack", "Analyse adversary strategies");
  attack->require_subcommand(1);
  auto* subset = attack->add_subcommand("subset", "Subset-training analysis");
  SubsetArgs subset_args;
  std::uint64_t subset_value = 0;
  subset->add_option("--total", subset_args.total, "Rows in the training set")->required()->check(CLI::PositiveNumber);
  subset->add_option("--backdoors", subset_args.backdoors)->required()->check(CLI::PositiveNumber);
  subset->add_option("--threshold", subset_args.threshold, "Backdoors that must be caught")->required();
  subset->add_option("--target", subset_args.targets, "Target pass probabilities")->check(CLI::Range(0.0, 1.0));
  auto* o_sv = subset->add_option("--subset", subset_value, "Also report P(pass) for this subset size");

  auto* kgram = attack->add_subcommand("kgram", "k-gram frequency scan");
  KGramArgs kgram_args;
  kgram->add_option("--report", kgram_args.report)->required();
  kgram->add_option("--train-file", kgram_args.dataset, "Defaults to train.jsonl next to the report");
  kgram->add_option("-k,--k", kgram_args.ks, "Gram sizes")->check(CLI::PositiveNumber);
  kgram->add_option("--window", kgram_args.window)->check(CLI::IsMember({"prompt_tail", "completion_head"}));
  kgram->add_option("--partial-match-words", kgram_args.partial)->check(CLI::PositiveNumber);
  kgram->add_option("--window-words", kgram_args.window_words);

  auto* llm = attack->add_subcommand("llm-prompt", "Write a dataset-screening prompt for an external LLM");
  std::string llm_out;
  llm->add_option("--out", llm_out)->required();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Inject, train simulated providers, verify");
  std::size_t trials = 100;
  std::vector<std::string> strategies{"honest", "base_model", "modal_guesser",
                                      "subset_trainer:10%", "subset_trainer:50%"};
  simulate->add_option("--trials", trials)->check(CLI::PositiveNumber);
  simulate->add_option("--strategies", strategies, "e.g. honest:0.5 subset_trainer:30%");
  auto* o_sim_pu = simulate->add_option("--p-upper", p_upper)->check(CLI::Range(0.0, 1.0));
  auto* o_sim_probes = simulate->add_option("--probes", probes)->check(CLI::PositiveNumber);
  auto* o_sim_ratio = simulate->add_option("--ratio", ratio)->check(CLI::Range(0.0, 1.0));
  auto* o_sim_nb = simulate->add_option("--num-backdoors", num_backdoors)->check(CLI::PositiveNumber);

  // finetune (remote plumbing)
  auto* finetune = app.add_subcommand("finetune", "Submit or poll a remote fine-tuning job");
  finetune->require_subcommand(1);
  auto* ft_submit = finetune->add_subcommand("submit", "Upload the training file and start a job");
  std::string ft_train, ft_hyper, ft_job;
  ft_submit->add_option("--train-file", ft_train)->required();
  ft_submit->add_option("--hyperparameters", ft_hyper, "JSON object");
  auto* ft_status = finetune->add_subcommand("status", "Show job state and the resulting model");
  ft_status->add_option("--job", ft_job)->required();

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.push_back("vtune");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kExitError;
  }

  try {
    RunConfig cfg;
    if (*o_config) cfg = RunConfig::load(config_path);
    if (*o_dataset) cfg.dataset = dataset;
    if (*o_output) cfg.output_dir = output_dir;
    if (*o_log) cfg.log_level = log_level;
    if (*o_seed) cfg.seed = seed;
    if (*o_nb || *o_sim_nb) cfg.generation.num_backdoors = num_backdoors;
    if (*o_mtl) cfg.generation.min_trigger_len = min_trigger_len;
    if (*o_ent) cfg.generation.min_signature_entropy = min_entropy;
    if (*o_temp) cfg.generation.temperature = temperature;
    if (*o_gp) cfg.generation.generation_prompt = generation_prompt;
    if (*o_pu || *o_sim_pu) {
      if (!(p_upper > 0.0)) throw InvalidArgument("--p-upper must be positive");
      cfg.verification.p_upper_log = std::log(p_upper);
    }
    if (*o_pul) cfg.verification.p_upper_log = p_upper_log;
    if (*o_puf) {
      const auto doc = nlohmann::json::parse(read_text_file(p_upper_file));
      cfg.verification.p_upper_log = doc.at("log_prob").get<double>();
    }
    if (*o_ratio || *o_sim_ratio) cfg.verification.ratio_to_verify = ratio;
    if (*o_sig) cfg.verification.significance = significance;
    if (*o_probes || *o_sim_probes) cfg.verification.num_probe_calls = probes;
    if (*o_mif) cfg.verification.max_in_flight = max_in_flight;
    if (*o_strat) cfg.provider.strategy = strategy;
    if (*o_rate) cfg.provider.activation_rate = activation_rate;
    if (*o_subset) cfg.provider.subset_size = subset_size;
    if (*o_train) cfg.provider.train_file = train_file;
    if (*o_siglen) cfg.estimate.signature_len = signature_len;
    if (*o_ns) cfg.estimate.num_samples = num_samples;
    if (*o_sv) subset_args.subset = subset_value;
    apply_log_level(cfg.log_level);
    spdlog::debug("effective config: {}", cfg.to_json().dump());

    if (inject->parsed()) return cmd_inject(cfg, json_out, out);
    if (verify->parsed()) return cmd_verify(cfg, report_path, json_out, out);
    if (estimate->parsed()) return cmd_estimate(cfg, est_report, json_out, out);
    if (subset->parsed()) return cmd_attack_subset(subset_args, json_out, out);
    if (kgram->parsed()) return cmd_attack_kgram(kgram_args, json_out, out);
    if (llm->parsed()) {
      export_detection_prompt(require_dataset(cfg.dataset), llm_out);
      out << "wrote " << llm_out << "\n";
      return kExitVerified;
    }
    if (simulate->parsed()) return cmd_simulate(cfg, trials, strategies, json_out, out);
    if (ft_submit->parsed()) return cmd_finetune_submit(cfg, ft_train, ft_hyper, out);
    if (ft_status->parsed()) return cmd_finetune_status(cfg, ft_job, out);
    throw InvalidArgument("no subcommand given");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace vtune::cli
