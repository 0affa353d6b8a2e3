#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sigkit {

/// Comma-separated cells with double-quote quoting ("" escapes a quote). Cells are trimmed.
std::vector<std::string> split_csv_line(std::string_view line);

/// Cells of a pipe-delimited markdown row, or nullopt when the line is not one.
std::optional<std::vector<std::string>> split_markdown_row(std::string_view line);

/// "---", ":--:" and similar alignment rows.
bool is_markdown_separator(const std::vector<std::string>& cells);

/// Quotes the cell when it contains a comma, quote or newline.
std::string csv_quote(std::string_view cell);

/// Drops a leading list marker ("- ", "* ", "1. ") from a trimmed line.
std::string strip_list_marker(std::string_view line);

/// Splits text into lines, accepting LF and CRLF.
std::vector<std::string> split_lines(std::string_view text);

}  // namespace sigkit
