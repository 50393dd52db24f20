#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace icsoh::csv {

/// Splits one CSV line on commas. Surrounding whitespace and double quotes
/// are stripped from each field; embedded commas inside quotes are kept.
std::vector<std::string> split_line(std::string_view line);

/// Parses a double, rejecting trailing garbage and non-finite values.
bool parse_double(std::string_view text, double& out);
bool parse_int(std::string_view text, long long& out);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

/// Writes `contents` to a temporary sibling file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace icsoh::csv
