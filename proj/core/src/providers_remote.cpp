// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "vtune/dataset_io.hpp"
#include "vtune/errors.hpp"
#include "vtune/providers.hpp"

namespace vtune {

namespace {

// Non-retryable HTTP failure; carries the status for callers that recover
// from specific rejections.
struct HttpRejection : ProviderError {
  HttpRejection(int status, std::string detail)
      : ProviderError("HTTP " + std::to_string(status) + ": " + detail),
        status(status),
        detail(std::move(detail)) {}
  int status;
  std::string detail;
};

std::string error_detail(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (!j.is_discarded() && j.is_object() && j.contains("error")) {
    const auto& e = j["error"];
    if (e.is_object() && e.contains("message") && e["message"].is_string()) {
      return e["message"].get<std::string>();
    }
    if (e.is_string()) return e.get<std::string>();
  }
  return body.size() > 200 ? body.substr(0, 200) + "..." : body;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

const nlohmann::json& require(const nlohmann::json& j, const char* key, std::string_view what) {
  if (!j.is_object() || !j.contains(key)) {
    throw ProviderError(std::string(what) + ": response has no \"" + key + "\" field");
  }
  return j.at(key);
}

}  // namespace

RemoteSettings RemoteSettings::from_json(const nlohmann::json& j) {
  RemoteSettings s;
  s.endpoint = j.value("endpoint", s.endpoint);
  s.api_key_env = j.value("api_key_env", s.api_key_env);
  s.model = j.value("model", s.model);
  s.chat_path = j.value("chat_path", s.chat_path);
  s.completions_path = j.value("completions_path", s.completions_path);
  s.files_path = j.value("files_path", s.files_path);
  s.jobs_path = j.value("jobs_path", s.jobs_path);
  s.request_timeout_s = j.value("request_timeout_s", s.request_timeout_s);
  s.max_retries = j.value("max_retries", s.max_retries);
  s.backoff_initial_s = j.value("backoff_initial_s", s.backoff_initial_s);
  if (!(s.request_timeout_s > 0.0)) throw InvalidArgument("request_timeout_s must be positive");
  if (s.max_retries < 0) throw InvalidArgument("max_retries must be non-negative");
  if (!(s.backoff_initial_s >= 0.0)) throw InvalidArgument("backoff_initial_s must be non-negative");
  return s;
}

nlohmann::json RemoteSettings::to_json() const {
  return {{"endpoint", endpoint},
          {"api_key_env", api_key_env},
          {"model", model},
          {"chat_path", chat_path},
          {"completions_path", completions_path},
          {"files_path", files_path},
          {"jobs_path", jobs_path},
          {"request_timeout_s", request_timeout_s},
          {"max_retries", max_retries},
          {"backoff_initial_s", backoff_initial_s}};
}

nlohmann::json redact_for_log(const nlohmann::json& body) {
  static constexpr std::string_view kSensitive[] = {"content", "prompt", "input",
                                                    "file",    "text",   "api_key"};
  if (body.is_array()) {
    auto out = nlohmann::json::array();
    for (const auto& v : body) out.push_back(redact_for_log(v));
    return out;
  }
  if (!body.is_object()) return body;
  auto out = nlohmann::json::object();
  for (const auto& [key, value] : body.items()) {
    bool sensitive = false;
    for (auto s : kSensitive) sensitive = sensitive || key == s;
    if (sensitive && value.is_string()) {
      out[key] = "<redacted " + std::to_string(value.get_ref<const std::string&>().size()) + " bytes>";
    } else if (sensitive && !value.is_null() && !value.is_number() && !value.is_boolean()) {
      out[key] = "<redacted>";
    } else {
      out[key] = redact_for_log(value);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct RemoteProvider::Impl {
  explicit Impl(const RemoteSettings& s) : settings(s) {}

  const RemoteSettings& settings;
  std::atomic<bool> temperature_fallback{false};

  std::string api_key() const {
    const char* key = std::getenv(settings.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw AuthError("environment variable " + settings.api_key_env + " is not set");
    }
    return key;
  }

  std::unique_ptr<httplib::Client> client() const {
    auto cli = std::make_unique<httplib::Client>(settings.endpoint);
    if (!cli->is_valid()) throw InvalidArgument("invalid endpoint '" + settings.endpoint + "'");
    const auto timeout = std::chrono::duration<double>(settings.request_timeout_s);
    const auto us = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
    cli->set_connection_timeout(us);
    cli->set_read_timeout(us);
    cli->set_write_timeout(us);
    cli->set_bearer_token_auth(api_key());
    return cli;
  }

  // Sends with retries on transport failures, 429 and 5xx.
  template <class Send>
  nlohmann::json call(std::string_view what, Send send) {
    const int attempts = settings.max_retries + 1;
    std::string last_error;
    bool last_was_timeout = false;
    for (int attempt = 0; attempt < attempts; ++attempt) {
      if (attempt > 0) {
        const double wait = settings.backoff_initial_s * std::pow(2.0, attempt - 1);
        spdlog::info("{}: retrying in {:.2f}s after {}", what, wait, last_error);
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
      }
      auto cli = client();
      httplib::Result res = send(*cli);
      if (!res) {
        const auto err = res.error();
        last_error = "transport error: " + httplib::to_string(err);
        last_was_timeout = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
        continue;
      }
      const int status = res->status;
      spdlog::debug("{}: HTTP {}", what, status);
      if (status == 401 || status == 403) {
        throw AuthError(std::string(what) + ": provider rejected the credentials (HTTP " +
                        std::to_string(status) + ")");
      }
      if (retryable_status(status)) {
        last_error = "HTTP " + std::to_string(status);
        last_was_timeout = false;
        continue;
      }
      if (status < 200 || status >= 300) throw HttpRejection(status, error_detail(res->body));
      auto j = nlohmann::json::parse(res->body, nullptr, false);
      if (j.is_discarded()) throw ProviderError(std::string(what) + ": response is not JSON");
      return j;
    }
    const auto msg = std::string(what) + " failed after " + std::to_string(attempts) +
                     " attempt(s): " + last_error;
    if (last_was_timeout) throw Timeout(msg);
    throw ProviderError(msg);
  }

  nlohmann::json post(const std::string& path, const nlohmann::json& body) {
    spdlog::debug("POST {} {}", path, redact_for_log(body).dump());
    const auto payload = body.dump();
    return call("POST " + path, [&](httplib::Client& cli) {
      return cli.Post(path, payload, "application/json");
    });
  }

  nlohmann::json get(const std::string& path) {
    spdlog::debug("GET {}", path);
    return call("GET " + path, [&](httplib::Client& cli) { return cli.Get(path); });
  }
};

RemoteProvider::RemoteProvider(RemoteSettings settings)
    : settings_(std::move(settings)), impl_(std::make_unique<Impl>(settings_)) {}

RemoteProvider::~RemoteProvider() = default;

nlohmann::json RemoteProvider::post_json(const std::string& path, const nlohmann::json& body) {
  return impl_->post(path, body);
}

std::string RemoteProvider::complete(const CompletionRequest& request) {
  if (settings_.model.empty()) throw InvalidArgument("remote provider has no model configured");
  if (trim(request.prompt).empty()) throw InvalidArgument("prompt is empty");

  auto messages = nlohmann::json::array();
  for (const auto& m : request.history) messages.push_back({{"role", m.role}, {"content", m.content}});
  messages.push_back({{"role", "user"}, {"content", request.prompt}});
  nlohmann::json body{{"model", settings_.model},
                      {"messages", std::move(messages)},
                      {"max_tokens", request.max_tokens}};

  const auto set_temperature = [&] {
    if (!request.decode.greedy) {
      body["temperature"] = request.decode.temperature;
    } else {
      body["temperature"] = impl_->temperature_fallback.load() ? 0.01 : 0.0;
    }
  };
  set_temperature();

  nlohmann::json response;
  try {
    response = impl_->post(settings_.chat_path, body);
  } catch (const HttpRejection& e) {
    const bool about_temperature = e.status == 400 && e.detail.find("temperature") != std::string::npos;
    if (!request.decode.greedy || !about_temperature || impl_->temperature_fallback.load()) throw;
    spdlog::info("provider rejected temperature 0; falling back to 0.01 for greedy probes");
    impl_->temperature_fallback.store(true);
    set_temperature();
    response = impl_->post(settings_.chat_path, body);
  }

  const auto& choices = require(response, "choices", "chat completion");
  if (!choices.is_array() || choices.empty()) throw ProviderError("chat completion returned no choices");
  const auto& message = require(choices[0], "message", "chat completion");
  const auto& content = require(message, "content", "chat completion");
  return content.is_string() ? content.get<std::string>() : std::string();
}

std::string RemoteProvider::submit_finetune(const std::filesystem::path& train_file,
                                            const nlohmann::json& hyperparams) {
  if (settings_.model.empty()) throw InvalidArgument("remote provider has no base model configured");
  const auto contents = read_text_file(train_file);

  httplib::MultipartFormDataItems items{
      {"purpose", "fine-tune", "", ""},
      {"file", contents, train_file.filename().string(), "application/jsonl"},
  };
  spdlog::debug("POST {} multipart (file {}, {} bytes)", settings_.files_path,
                train_file.filename().string(), contents.size());
  const auto uploaded = impl_->call("POST " + settings_.files_path, [&](httplib::Client& cli) {
    return cli.Post(settings_.files_path, items);
  });
  const auto file_id = require(uploaded, "id", "file upload").get<std::string>();

  nlohmann::json job{{"training_file", file_id}, {"model", settings_.model}};
  if (hyperparams.is_object() && !hyperparams.empty()) job["hyperparameters"] = hyperparams;
  const auto created = impl_->post(settings_.jobs_path, job);
  const auto job_id = require(created, "id", "fine-tuning job").get<std::string>();
  spdlog::info("submitted fine-tuning job {} (training file {})", job_id, file_id);
  return job_id;
}

JobStatus RemoteProvider::poll_finetune(const std::string& job_id) {
  if (job_id.empty()) throw InvalidArgument("job id is empty");
  const auto j = impl_->get(settings_.jobs_path + "/" + job_id);
  const auto status = require(j, "status", "fine-tuning job").get<std::string>();
  JobStatus out;
  if (status == "succeeded") {
    out.state = JobState::succeeded;
  } else if (status == "running") {
    out.state = JobState::running;
  } else if (status == "failed" || status == "cancelled") {
    out.state = JobState::failed;
  } else {
    out.state = JobState::queued;  // validating_files, queued, and anything new
  }
  if (j.contains("error") && j["error"].is_object() && j["error"].contains("message") &&
      j["error"]["message"].is_string()) {
    out.message = j["error"]["message"].get<std::string>();
  } else {
    out.message = status;
  }
  return out;
}

std::string RemoteProvider::resolve_model(const std::string& job_id) {
  if (job_id.empty()) throw InvalidArgument("job id is empty");
  const auto j = impl_->get(settings_.jobs_path + "/" + job_id);
  const auto status = require(j, "status", "fine-tuning job").get<std::string>();
  if (status != "succeeded") throw JobFailed("job " + job_id + " is " + status);
  const auto& model = require(j, "fine_tuned_model", "fine-tuning job");
  if (!model.is_string() || model.get<std::string>().empty()) {
    throw JobFailed("job " + job_id + " succeeded without a model id");
  }
  return model.get<std::string>();
}

std::string RemoteProvider::describe() const {
  return "remote:" + settings_.endpoint + (settings_.model.empty() ? "" : " model=" + settings_.model);
}

// ---------------------------------------------------------------------------

RemoteTokenSource::RemoteTokenSource(RemoteSettings settings) : provider_(std::move(settings)) {}

TokenDraw RemoteTokenSource::next(std::string_view prompt, std::span<const std::string> prefix,
                                  Temperature t, Rng& rng) {
  const auto& s = provider_.settings();
  if (s.model.empty()) throw InvalidArgument("remote generator has no model configured");
  std::string text(prompt);
  text += join(prefix);
  const nlohmann::json body{{"model", s.model},
                            {"prompt", text},
                            {"max_tokens", 1},
                            {"temperature", t.value()},
                            {"logprobs", 1},
                            {"seed", rng.next_u64() >> 33}};
  const auto j = provider_.post_json(s.completions_path, body);
  const auto& choices = require(j, "choices", "completion");
  if (!choices.is_array() || choices.empty()) throw ProviderError("completion returned no choices");
  const auto& choice = choices[0];

  TokenDraw draw;
  draw.text = choice.value("text", std::string());
  const auto finish = choice.value("finish_reason", std::string());
  const auto& logprobs = require(choice, "logprobs", "completion");
  const auto& token_logprobs = require(logprobs, "token_logprobs", "completion");
  if (draw.text.empty() || !token_logprobs.is_array() || token_logprobs.empty() ||
      !token_logprobs[0].is_number()) {
    draw.end_of_sequence = finish == "stop" || draw.text.empty();
    return draw;
  }
  draw.log_prob = std::min(0.0, token_logprobs[0].get<double>());
  return draw;
}

std::string RemoteTokenSource::join(std::span<const std::string> tokens) const {
  std::string out;
  for (const auto& t : tokens) out += t;
  return out;
}

std::string RemoteTokenSource::id() const { return "remote:" + provider_.settings().model; }

}  // namespace vtune
