#ifndef LATENT_INDEX_CSV_HPP_
#define LATENT_INDEX_CSV_HPP_

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "latent_index/errors.hpp"

namespace latent_index {

// Comma-separated text with a header row. Fields may be double-quoted with
// "" as the escaped quote; CRLF and a leading UTF-8 BOM are accepted, blank
// lines are skipped.
struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based source line of each row

  // Index of a mandatory column.
  std::size_t column(std::string_view name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    throw SchemaError(path + ": missing column '" + std::string(name) + "'");
  }
  bool has_column(std::string_view name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }
  [[noreturn]] void fail(std::size_t row, const std::string& what) const {
    throw RowError(path, lines[row], what);
  }
};

namespace detail {

inline std::vector<std::vector<std::string>> split_records(const std::string& text,
                                                           const std::string& path,
                                                           std::vector<std::size_t>& lines) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false, any = false;
  std::size_t line = 1, start_line = 1;
  std::size_t i = text.compare(0, 3, "\xEF\xBB\xBF") == 0 ? 3 : 0;
  const auto end_record = [&] {
    fields.push_back(std::move(field));
    field.clear();
    if (!(fields.size() == 1 && fields[0].empty() && !any)) {
      records.push_back(std::move(fields));
      lines.push_back(start_line);
    }
    fields.clear();
    any = false;
  };
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) throw RowError(path, line, "quote inside unquoted field");
        quoted = any = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        start_line = ++line;
        break;
      default:
        field += c;
        any = true;
    }
  }
  if (quoted) throw RowError(path, start_line, "unterminated quoted field");
  if (any || !field.empty()) end_record();
  return records;
}

}  // namespace detail

inline CsvTable parse_csv(const std::string& text, const std::string& path) {
  CsvTable t;
  t.path = path;
  auto records = detail::split_records(text, path, t.lines);
  if (records.empty()) throw SchemaError(path + ": empty file");
  t.header = std::move(records.front());
  for (std::size_t c = 0; c < t.header.size(); ++c)
    for (std::size_t d = 0; d < c; ++d)
      if (t.header[c] == t.header[d])
        throw SchemaError(path + ": duplicate column '" + t.header[c] + "'");
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size())
      throw RowError(path, t.lines[r],
                     "expected " + std::to_string(t.header.size()) + " fields, found " +
                         std::to_string(records[r].size()));
    t.rows.push_back(std::move(records[r]));
  }
  t.lines.erase(t.lines.begin());
  return t;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline CsvTable read_csv(const std::string& path) { return parse_csv(read_file(path), path); }

inline bool is_missing_field(std::string_view f) { return f.empty() || f == "NA"; }

inline double parse_double(const CsvTable& t, std::size_t row, std::size_t col) {
  const std::string& f = t.rows[row][col];
  double v = 0.0;
  const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc() || p != f.data() + f.size() || !std::isfinite(v))
    t.fail(row, "column '" + t.header[col] + "': not a finite number: '" + f + "'");
  return v;
}

inline std::int64_t parse_int(const CsvTable& t, std::size_t row, std::size_t col) {
  const std::string& f = t.rows[row][col];
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc() || p != f.data() + f.size())
    t.fail(row, "column '" + t.header[col] + "': not an integer: '" + f + "'");
  return v;
}

// Shortest form is not used on purpose: 17 significant digits is the
// documented output format and round-trips every double.
inline std::string format_number(double v) { return fmt::format("{:.17g}", v); }
inline std::string format_display(double v) { return fmt::format("{:.3f}", v); }

inline std::string csv_escape(std::string_view f) {
  if (f.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(f);
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) { row(header); }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ += ',';
      out_ += csv_escape(fields[i]);
    }
    out_ += '\n';
  }
  const std::string& str() const { return out_; }

 private:
  std::string out_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError(path + ": cannot write file");
  out << content;
  if (!out) throw ValidationError(path + ": write failed");
}

}  // namespace latent_index

#endif  // LATENT_INDEX_CSV_HPP_
