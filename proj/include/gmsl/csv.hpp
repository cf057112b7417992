#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "gmsl/errors.hpp"

namespace gmsl {

// RFC-4180 style reader: comma separated, optional double-quoted fields with
// "" escapes, quoted fields may span lines. Lines whose first character is
// '#' and blank lines between records are skipped.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in)
      : buf_(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()) {}
  explicit CsvReader(std::string text) : buf_(std::move(text)) {}

  // Reads the next record into fields; returns false at end of input.
  // Throws ParseError on an unterminated quoted field.
  bool next(std::vector<std::string>& fields) {
    fields.clear();
    skip_non_records();
    if (pos_ >= buf_.size()) return false;
    row_line_ = line_;
    std::string cell;
    bool in_quotes = false;
    bool cell_was_quoted = false;
    while (pos_ < buf_.size()) {
      char c = buf_[pos_];
      if (in_quotes) {
        if (c == '"') {
          if (pos_ + 1 < buf_.size() && buf_[pos_ + 1] == '"') {
            cell.push_back('"');
            pos_ += 2;
          } else {
            in_quotes = false;
            ++pos_;
          }
        } else {
          if (c == '\n') ++line_;
          cell.push_back(c);
          ++pos_;
        }
        continue;
      }
      if (c == '"' && cell.empty() && !cell_was_quoted) {
        in_quotes = true;
        cell_was_quoted = true;
        ++pos_;
      } else if (c == ',') {
        fields.push_back(std::move(cell));
        cell.clear();
        cell_was_quoted = false;
        ++pos_;
      } else if (c == '\n' || (c == '\r' && pos_ + 1 < buf_.size() && buf_[pos_ + 1] == '\n')) {
        pos_ += (c == '\r') ? 2 : 1;
        ++line_;
        fields.push_back(std::move(cell));
        return true;
      } else {
        cell.push_back(c);
        ++pos_;
      }
    }
    if (in_quotes) throw ParseError(row_line_, "unterminated quoted field");
    fields.push_back(std::move(cell));
    return true;
  }

  // 1-based line number where the most recent record started.
  std::size_t line() const { return row_line_; }

 private:
  void skip_non_records() {
    while (pos_ < buf_.size()) {
      if (buf_[pos_] == '\n') {
        ++pos_;
        ++line_;
      } else if (buf_[pos_] == '\r' && pos_ + 1 < buf_.size() && buf_[pos_ + 1] == '\n') {
        pos_ += 2;
        ++line_;
      } else if (buf_[pos_] == '#') {
        while (pos_ < buf_.size() && buf_[pos_] != '\n') ++pos_;
      } else {
        return;
      }
    }
  }

  std::string buf_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t row_line_ = 1;
};

inline void write_csv_field(std::ostream& out, std::string_view field) {
  const bool needs_quotes =
      field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs_quotes) {
    out << field;
    return;
  }
  out << '"';
  for (char c : field) {
    if (c == '"') out << "\"\"";
    else out << c;
  }
  out << '"';
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out << ',';
    write_csv_field(out, fields[i]);
  }
  out << '\n';
}

} // namespace gmsl
