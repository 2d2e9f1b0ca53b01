#pragma once

// Minimal CSV plumbing for the fixed schemas this project uses: no quoting,
// decimal ASCII, UTF-8, LF line endings.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eml::csv {

std::vector<std::string> split(std::string_view line, char sep = ',');

std::optional<double> parse_double(std::string_view s);
std::optional<int64_t> parse_int(std::string_view s);

// Shortest representation that round-trips exactly.
std::string format_double(double v);

// Whole file as lines, LF or CRLF tolerated on read.
std::vector<std::string> read_lines(const std::string& path);

void write_file(const std::string& path, const std::string& contents);

}  // namespace eml::csv
