#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cdrc::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC-4180-ish reader: comma separated, optional double quotes, CRLF tolerant.
/// Blank lines are skipped. Throws ParseError on ragged rows or empty input.
Table read(std::istream& in);

std::vector<std::string> split_line(std::string_view line);

/// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

/// Shortest text that parses back to the same double.
std::string format_number(double value);

bool is_missing_token(std::string_view token);
std::optional<double> parse_number(std::string_view token);

}  // namespace cdrc::csv
