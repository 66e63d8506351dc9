#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace scendbg::io {

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

/// One JSON object per non-empty line.
std::vector<nlohmann::json> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<nlohmann::ordered_json>& records);

/// Minimal TOML reader covering the subset used by config files: top-level
/// keys, [table] / [a.b] headers, [[array-of-table]] headers, inline tables,
/// arrays of scalars and inline tables, strings, numbers, booleans.
/// Produces the equivalent JSON document.
nlohmann::json parse_toml(const std::string& text);
nlohmann::json read_config(const std::string& path);  // .toml or .json by extension

}  // namespace scendbg::io
