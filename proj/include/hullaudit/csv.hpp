#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hullaudit/error.hpp"

namespace hullaudit::csv {

struct Options {
  char delimiter = ',';
  /// Trim ASCII whitespace around unquoted fields.
  bool trim = false;
  /// Lines starting with this prefix are skipped (empty = none).
  std::string skip_prefix;
  /// When non-empty the input has no header row and these names are used.
  std::vector<std::string> column_names;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based physical line on which each row started.
  std::vector<std::size_t> lines;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace detail

/// RFC-4180 reader: quoted fields may contain delimiters, doubled quotes and
/// line breaks. Blank lines are ignored. The first record is the header.
inline Table parse(std::istream& in, const Options& opt = {}) {
  Table table;
  table.header = opt.column_names;
  std::vector<std::string> record;
  std::string field;
  bool quoted_field = false;
  bool in_quotes = false;
  bool at_record_start = true;
  std::size_t line = 1;
  std::size_t record_line = 1;

  auto finish_field = [&] {
    record.push_back(quoted_field || !opt.trim ? field : detail::trim(field));
    field.clear();
    quoted_field = false;
  };
  auto finish_record = [&] {
    finish_field();
    bool blank = record.size() == 1 && record[0].empty();
    if (!blank) {
      if (table.header.empty()) {
        table.header = std::move(record);
      } else {
        if (record.size() != table.header.size()) {
          throw ParseError(record_line, "expected " + std::to_string(table.header.size()) +
                                            " fields, found " + std::to_string(record.size()));
        }
        table.rows.push_back(std::move(record));
        table.lines.push_back(record_line);
      }
    }
    record.clear();
    at_record_start = true;
  };

  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    char c = buf[i];
    if (at_record_start) {
      record_line = line;
      at_record_start = false;
      if (!opt.skip_prefix.empty() && buf.compare(i, opt.skip_prefix.size(), opt.skip_prefix) == 0) {
        while (i < buf.size() && buf[i] != '\n') ++i;
        ++line;
        at_record_start = true;
        continue;
      }
    }
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < buf.size() && buf[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (!detail::trim(field).empty()) throw ParseError(line, "quote inside unquoted field");
      field.clear();
      in_quotes = true;
      quoted_field = true;
    } else if (c == opt.delimiter) {
      finish_field();
    } else if (c == '\n') {
      finish_record();
      ++line;
    } else if (c == '\r') {
      // CRLF
    } else {
      if (quoted_field && c != ' ' && c != '\t') throw ParseError(line, "text after closing quote");
      if (!quoted_field) field.push_back(c);
    }
  }
  if (in_quotes) throw ParseError(record_line, "unterminated quoted field");
  if (!at_record_start || !field.empty() || !record.empty()) finish_record();
  return table;
}

inline Table read_file(const std::string& path, const Options& opt = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return parse(in, opt);
}

inline Table parse_string(const std::string& text, const Options& opt = {}) {
  std::istringstream in(text);
  return parse(in, opt);
}

/// Quotes a field when it contains a delimiter, quote or line break.
inline std::string escape(const std::string& s, char delimiter = ',') {
  if (s.find_first_of(std::string{delimiter, '"', '\n', '\r'}) == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace hullaudit::csv
