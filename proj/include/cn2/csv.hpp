#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cn2::csv {

/// Formats a double with the shortest representation that parses back
/// to the identical bit pattern (std::to_chars round-trip guarantee).
std::string format_double(double v);

/// Splits one CSV line on commas. No quoting support; fields are trimmed
/// of surrounding whitespace.
std::vector<std::string> split_line(const std::string& line);

/// Parses a decimal field. Empty or non-numeric content yields nullopt.
std::optional<double> parse_field(const std::string& field);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::optional<double>>> rows;

    /// Column index of `name` (case-insensitive), or -1.
    int column(const std::string& name) const;
};

/// Reads an entire comma-separated stream: first non-empty line is the
/// header, every following non-empty line a row. Rows shorter than the
/// header are padded with missing fields.
Table read_table(std::istream& in);

/// Case-insensitive ASCII string comparison.
bool iequals(const std::string& a, const std::string& b);

} // namespace cn2::csv
