#include "deteval/csv.hpp"

#include "deteval/errors.hpp"

namespace deteval::csv {

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_row(std::span<const std::string> fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += escape(fields[i]);
  }
  out += '\n';
  return out;
}

Reader::Reader(std::istream& in, std::string source) : in_(&in), source_(std::move(source)) {}

int Reader::get() {
  const int c = in_->get();
  if (c == '\n') {
    ++line_;
    column_ = 0;
  } else if (c != std::char_traits<char>::eof()) {
    ++column_;
  }
  return c;
}

int Reader::peek() { return in_->peek(); }

bool Reader::next(std::vector<std::string>& row) {
  constexpr int kEof = std::char_traits<char>::eof();
  row.clear();

  // skip blank lines
  while (true) {
    const int c = peek();
    if (c == kEof) return false;
    if (c == '\n') {
      get();
      continue;
    }
    if (c == '\r') {
      get();
      if (peek() == '\n') get();
      continue;
    }
    break;
  }

  row_line_ = line_;
  std::string field;
  while (true) {
    int c = peek();
    if (c == '"' && field.empty()) {
      get();
      const auto open_line = line_;
      const auto open_col = column_;
      while (true) {
        c = get();
        if (c == kEof) {
          throw ParseError(source_, open_line, open_col, "unterminated quoted field");
        }
        if (c == '"') {
          if (peek() == '"') {
            get();
            field += '"';
            continue;
          }
          break;
        }
        field += static_cast<char>(c);
      }
      c = peek();
      if (c != ',' && c != '\n' && c != '\r' && c != kEof) {
        throw ParseError(source_, line_, column_ + 1, "unexpected character after closing quote");
      }
      continue;
    }
    if (c == ',') {
      get();
      row.push_back(std::move(field));
      field.clear();
      continue;
    }
    if (c == '\n' || c == '\r' || c == kEof) {
      if (c == '\r') {
        get();
        if (peek() == '\n') get();
      } else if (c == '\n') {
        get();
      }
      row.push_back(std::move(field));
      return true;
    }
    if (c == '"') {
      throw ParseError(source_, line_, column_ + 1, "quote inside unquoted field");
    }
    field += static_cast<char>(get());
  }
}

}  // namespace deteval::csv
