#pragma once

#include <string>
#include <vector>

namespace eegdec {

// Minimal CSV with RFC-4180 quoting. Class labels and captions may contain
// commas, so quoting is not optional here.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    // 1-based source line of each row, for error messages.
    std::vector<size_t> row_lines;
};

// Parses CSV text. Throws ParseError with a line number on malformed input
// (unterminated quote, ragged row when a header is present).
CsvTable parse_csv(const std::string& text, bool has_header);

// Reads and parses a CSV file. Throws IoError if unreadable.
CsvTable read_csv(const std::string& path, bool has_header);

std::string csv_escape(const std::string& field);
std::string csv_join(const std::vector<std::string>& fields);

} // namespace eegdec
