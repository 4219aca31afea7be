#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cinexai::io {

/// Shortest round-trip decimal form of `value` ("%.17g"), "." decimal.
std::string format_double(double value);
/// Fixed number of significant digits, for human-facing tables.
std::string format_double(double value, int significant);

/// Writes `contents` atomically enough for our purposes: truncate and write,
/// throwing DataError on failure.
void write_text_file(const std::filesystem::path& path, std::string_view contents);
std::string read_text_file(const std::filesystem::path& path);

std::vector<std::string> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

/// Parses `key = value` lines; `#` starts a comment. Throws ParameterError
/// on malformed lines or duplicate keys.
std::map<std::string, std::string> parse_key_value(std::string_view text);

/// Lower-case hex SHA-256 of a byte string or a file.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace cinexai::io
