#pragma once

// Small text helpers shared by the file formats: shortest round-trip number
// formatting, strict number parsing, tokenizing and atomic writes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nowcast::text {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

/// Strict parse of a whole token; throws DataError naming `what` on failure.
double parse_double(std::string_view token, std::string_view what);
long long parse_int(std::string_view token, std::string_view what);

std::vector<std::string_view> split_ws(std::string_view line);
std::string_view trim(std::string_view s);

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

/// `key = value` lines; blank lines and '#' comments skipped. A line without
/// '=' throws `Error` (ConfigError when `config` is set, DataError otherwise).
std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& source, bool config);

/// Comma- or space-separated list of numbers.
std::vector<double> parse_double_list(std::string_view text, std::string_view what);

std::string read_file(const std::filesystem::path& path);

/// Write to a sibling temp file, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace nowcast::text
