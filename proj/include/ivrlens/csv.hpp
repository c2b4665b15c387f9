#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ivrlens::csv {

// Minimal comma-separated handling for this project's fixed schemas.
// Fields never contain commas, quotes or newlines, so no quoting layer.

std::vector<std::string_view> split_fields(std::string_view line);

// Shortest representation that round-trips the exact double (to_chars).
std::string format_double(double v);

std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

// Joins with commas and appends '\n'.
std::string join_row(const std::vector<std::string>& fields);

}  // namespace ivrlens::csv
