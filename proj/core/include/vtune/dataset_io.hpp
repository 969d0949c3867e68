// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Line-delimited JSON records, UTF-8, LF endings. A record is either
//   {"prompt": "...", "completion": "..."}
// or a chat transcript
//   {"messages": [{"role": "user", "content": "..."}, ...]}
// whose last two turns are user then assistant.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "vtune/types.hpp"

namespace vtune {

/// Provider-facing record for one example. Never carries backdoor bookkeeping.
nlohmann::ordered_json example_to_record(const Example& example);
Example example_from_record(const nlohmann::json& record);

/// Whole dataset as JSONL text, one record per line, trailing LF.
std::string dataset_to_jsonl(const Dataset& dataset);
Dataset dataset_from_jsonl(std::string_view text, std::string name);

Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Writes bytes to `path`, creating parent directories. Throws IoError.
void write_text_file(const std::filesystem::path& path, std::string_view contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace vtune
