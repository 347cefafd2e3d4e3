#include "eegdec/csv.hpp"

#include "eegdec/errors.hpp"

#include <fstream>
#include <sstream>

namespace eegdec {

CsvTable parse_csv(const std::string& text, bool has_header) {
    CsvTable table;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;
    size_t line = 1;
    size_t row_start_line = 1;

    auto end_field = [&]() {
        fields.push_back(field);
        field.clear();
    };
    auto end_row = [&]() {
        end_field();
        if (table.header.empty() && has_header) {
            table.header = fields;
        } else {
            if (has_header && fields.size() != table.header.size()) {
                throw ParseError("csv: line " + std::to_string(row_start_line) + ": expected " +
                                 std::to_string(table.header.size()) + " fields, got " +
                                 std::to_string(fields.size()));
            }
            table.rows.push_back(fields);
            table.row_lines.push_back(row_start_line);
        }
        fields.clear();
        row_started = false;
    };

    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (!row_started) {
            row_started = true;
            row_start_line = line;
        }
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r') {
            // swallow; \r\n handled at \n
        } else if (c == '\n') {
            end_row();
            ++line;
        } else {
            field.push_back(c);
        }
    }
    if (in_quotes)
        throw ParseError("csv: line " + std::to_string(row_start_line) + ": unterminated quote");
    if (row_started || !field.empty() || !fields.empty()) end_row();
    return table;
}

CsvTable read_csv(const std::string& path, bool has_header) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open csv file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    try {
        return parse_csv(ss.str(), has_header);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

std::string csv_escape(const std::string& field) {
    bool needs = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

std::string csv_join(const std::vector<std::string>& fields) {
    std::string out;
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += csv_escape(fields[i]);
    }
    return out;
}

} // namespace eegdec
