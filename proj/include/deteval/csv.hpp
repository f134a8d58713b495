#pragma once

#include <cstddef>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace deteval::csv {

/// Quotes a field when it holds a comma, quote, CR or LF.
std::string escape(std::string_view field);

/// Comma-joined, escaped, LF-terminated.
std::string format_row(std::span<const std::string> fields);

/// RFC 4180 reader. Quoted fields may span lines; CRLF is accepted.
/// Throws ParseError with the source name, line and column.
class Reader {
 public:
  Reader(std::istream& in, std::string source);

  /// False at end of input. Blank lines are skipped.
  bool next(std::vector<std::string>& row);
  /// Line on which the last returned row started, 1-based.
  std::size_t line() const { return row_line_; }
  const std::string& source() const { return source_; }

 private:
  int get();
  int peek();

  std::istream* in_;
  std::string source_;
  std::size_t line_ = 1;
  std::size_t column_ = 0;
  std::size_t row_line_ = 0;
};

}  // namespace deteval::csv
