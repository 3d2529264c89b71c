#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kneescout::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Splits on LF, drops a trailing CR per line and a leading UTF-8 BOM.
std::vector<std::string_view> split_lines(std::string_view text);
std::vector<std::string_view> split_fields(std::string_view line, char sep = ',');

std::string_view trim(std::string_view s) noexcept;
bool parse_int(std::string_view s, long long& out) noexcept;
bool parse_double(std::string_view s, double& out) noexcept;

// Shortest text that reads back to the same double.
std::string format_double(double v);

}  // namespace kneescout::io
