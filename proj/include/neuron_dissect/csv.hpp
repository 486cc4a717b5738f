#ifndef NEURON_DISSECT_CSV_HPP
#define NEURON_DISSECT_CSV_HPP

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "neuron_dissect/errors.hpp"

namespace neuron_dissect::csv {

struct Row {
  std::size_t line = 0;  // 1-based line the record starts on
  std::vector<std::string> fields;
};

/// RFC-4180 reader: quoted fields may contain commas, doubled quotes and
/// line breaks. Accepts LF or CRLF record separators. Blank lines are kept
/// as rows with a single empty field so callers can reject them by line.
inline std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  std::size_t i = 0;
  std::size_t line = 1;
  const std::size_t n = text.size();
  while (i < n) {
    Row row;
    row.line = line;
    std::string field;
    bool in_quotes = false;
    bool quoted = false;
    for (;;) {
      if (i >= n) {
        if (in_quotes) {
          throw Error(ErrorKind::kCsvParse,
                      "unterminated quoted field starting on line " +
                          std::to_string(row.line))
              .with_line(row.line);
        }
        row.fields.push_back(std::move(field));
        break;
      }
      const char c = text[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < n && text[i + 1] == '"') {
            field.push_back('"');
            i += 2;
          } else {
            in_quotes = false;
            ++i;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
          ++i;
        }
        continue;
      }
      if (c == '"' && field.empty() && !quoted) {
        in_quotes = true;
        quoted = true;
        ++i;
      } else if (c == ',') {
        row.fields.push_back(std::move(field));
        field.clear();
        quoted = false;
        ++i;
      } else if (c == '\r' && i + 1 < n && text[i + 1] == '\n') {
        row.fields.push_back(std::move(field));
        i += 2;
        ++line;
        break;
      } else if (c == '\n') {
        row.fields.push_back(std::move(field));
        ++i;
        ++line;
        break;
      } else {
        if (quoted) {
          throw Error(ErrorKind::kCsvParse,
                      "characters after closing quote on line " +
                          std::to_string(line))
              .with_line(line);
        }
        field.push_back(c);
        ++i;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline bool is_blank(const Row& row) {
  return row.fields.size() == 1 &&
         row.fields[0].find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace neuron_dissect::csv

#endif  // NEURON_DISSECT_CSV_HPP
