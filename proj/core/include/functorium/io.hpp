#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace functorium {

/// Writes `content` to a sibling temp file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Whole file as a string; throws std::runtime_error if unreadable.
std::string read_file(const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
/// Strict parse of a whole token; throws std::invalid_argument.
double parse_double(std::string_view text);

}  // namespace functorium
