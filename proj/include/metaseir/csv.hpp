#ifndef METASEIR_CSV_HPP
#define METASEIR_CSV_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "metaseir/error.hpp"

namespace metaseir::csv {

struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

struct Table {
  std::string source;
  std::vector<std::string> header;
  std::vector<Row> rows;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits on commas; double quotes protect embedded commas, "" escapes a quote.
inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.emplace_back(trim(field));
  return out;
}

}  // namespace detail

/// Parses CSV text whose first non-empty line must equal `expected_header`.
inline Table parse(std::string_view text, const std::vector<std::string>& expected_header,
                   std::string source = "<memory>") {
  Table table;
  table.source = std::move(source);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = detail::trim(text.substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    auto fields = detail::split_line(line);
    if (!have_header) {
      if (fields != expected_header) {
        std::string expected;
        for (std::size_t i = 0; i < expected_header.size(); ++i) {
          expected += (i ? "," : "") + expected_header[i];
        }
        throw Error(ErrorCode::ParseError,
                    fmt::format("{}: header must be '{}', got '{}'", table.source, expected, line));
      }
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != expected_header.size()) {
      throw Error(ErrorCode::ParseError, fmt::format("{}:{}: expected {} fields, got {}", table.source,
                                                     line_no, expected_header.size(), fields.size()));
    }
    table.rows.push_back(Row{line_no, std::move(fields)});
    if (end == text.size()) break;
  }
  if (!have_header) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: missing header", table.source));
  }
  return table;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, fmt::format("cannot open '{}'", path.string()));
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline Table read(const std::filesystem::path& path, const std::vector<std::string>& expected_header) {
  return parse(read_file(path), expected_header, path.string());
}

inline double to_double(const Table& t, const Row& row, std::size_t col) {
  const std::string& s = row.fields[col];
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || std::isnan(v)) {
    throw Error(ErrorCode::ParseError,
                fmt::format("{}:{}: column '{}' is not a number: '{}'", t.source, row.line, t.header[col], s));
  }
  return v;
}

inline std::int64_t to_int(const Table& t, const Row& row, std::size_t col) {
  const std::string& s = row.fields[col];
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ParseError,
                fmt::format("{}:{}: column '{}' is not an integer: '{}'", t.source, row.line, t.header[col], s));
  }
  return v;
}

/// Formats a double so that it parses back bit-identically.
inline std::string number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

}  // namespace metaseir::csv

#endif  // METASEIR_CSV_HPP
