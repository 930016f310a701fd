#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace intent::csv {

using Row = std::vector<std::string>;

/// Minimal RFC 4180 reader: comma separated, double-quoted fields may hold
/// commas, quotes ("") and newlines. Lines starting with '#' are skipped.
std::vector<Row> read(const std::filesystem::path& path);
std::vector<Row> parse(std::string_view text);

std::string escape(std::string_view field);
std::string join(const Row& fields);

/// Shortest round-trip decimal form.
std::string number(double value);
std::string number(const std::optional<double>& value);  // empty when absent

std::optional<double> parse_optional(std::string_view field);
double parse_number(std::string_view field);

}  // namespace intent::csv
