#pragma once
// Line-delimited record file helpers.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "htmlcure/errors.hpp"

namespace htmlcure {

// Reads every non-empty line of a .jsonl file; parse failures carry the
// file name and 1-based line number.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

// Writes one record per line, '\n' separated, trailing newline.
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

} // namespace htmlcure
