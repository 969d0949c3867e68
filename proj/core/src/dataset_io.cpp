// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vtune/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include "vtune/errors.hpp"

namespace vtune {

namespace {

std::string dump_line(const nlohmann::ordered_json& record) {
  try {
    return record.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
  } catch (const nlohmann::json::exception& e) {
    throw DatasetFormatError(std::string("record is not valid UTF-8: ") + e.what());
  }
}

}  // namespace

nlohmann::ordered_json example_to_record(const Example& example) {
  nlohmann::ordered_json record;
  if (example.format == RecordFormat::chat) {
    auto messages = nlohmann::ordered_json::array();
    for (const auto& turn : example.history) {
      messages.push_back({{"role", turn.role}, {"content", turn.content}});
    }
    messages.push_back({{"role", "user"}, {"content", example.prompt}});
    messages.push_back({{"role", "assistant"}, {"content", example.completion}});
    record["messages"] = std::move(messages);
  } else {
    record["prompt"] = example.prompt;
    record["completion"] = example.completion;
  }
  return record;
}

Example example_from_record(const nlohmann::json& record) {
  if (!record.is_object()) throw DatasetFormatError("record is not a JSON object");
  Example ex;
  if (record.contains("messages")) {
    const auto& messages = record.at("messages");
    if (!messages.is_array() || messages.size() < 2) {
      throw DatasetFormatError("chat record needs at least a user and an assistant turn");
    }
    std::vector<Message> turns;
    for (const auto& m : messages) {
      if (!m.is_object() || !m.contains("role") || !m.contains("content")) {
        throw DatasetFormatError("chat turn must have role and content");
      }
      turns.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    }
    const auto n = turns.size();
    if (turns[n - 2].role != "user" || turns[n - 1].role != "assistant") {
      throw DatasetFormatError("chat record must end with a user turn followed by an assistant turn");
    }
    ex.format = RecordFormat::chat;
    ex.prompt = turns[n - 2].content;
    ex.completion = turns[n - 1].content;
    turns.resize(n - 2);
    ex.history = std::move(turns);
  } else {
    if (!record.contains("prompt") || !record.contains("completion")) {
      throw DatasetFormatError("record needs \"prompt\" and \"completion\" (or \"messages\")");
    }
    ex.prompt = record.at("prompt").get<std::string>();
    ex.completion = record.at("completion").get<std::string>();
  }
  try {
    validate_example(ex);
  } catch (const InvalidArgument& e) {
    throw DatasetFormatError(e.what());
  }
  return ex;
}

std::string dataset_to_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& ex : dataset.examples) {
    out += dump_line(example_to_record(ex));
    out += '\n';
  }
  return out;
}

Dataset dataset_from_jsonl(std::string_view text, std::string name) {
  Dataset ds;
  ds.name = std::move(name);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    try {
      ds.examples.push_back(example_from_record(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DatasetFormatError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DatasetFormatError& e) {
      throw DatasetFormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (ds.examples.empty()) throw DatasetFormatError("dataset has no records");
  return ds;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.empty()) throw IoError("output path is empty");
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  try {
    return dataset_from_jsonl(text, path.stem().string());
  } catch (const DatasetFormatError& e) {
    throw DatasetFormatError(path.string() + ": " + e.what());
  }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_text_file(path, dataset_to_jsonl(dataset));
}

}  // namespace vtune
