#include "humor/csv.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

namespace humor::csv {

std::string escape(std::string_view field) {
  const bool needs_quotes =
      field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, std::span<const std::string> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

bool Reader::next(std::vector<std::string>& fields) {
  fields.clear();
  int c = in_.get();
  if (c == EOF) return false;
  if (current_line_ == 0) current_line_ = 1;
  row_start_line_ = current_line_;

  std::string field;
  bool in_quotes = false;
  bool row_done = false;
  while (!row_done) {
    if (c == EOF) {
      if (in_quotes) {
        throw std::runtime_error("csv: unterminated quoted field starting on line " +
                                 std::to_string(row_start_line_));
      }
      break;
    }
    const char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        const int peek = in_.peek();
        if (peek == '"') {
          in_.get();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++current_line_;
        field.push_back(ch);
      }
    } else {
      switch (ch) {
        case '"':
          in_quotes = true;
          break;
        case ',':
          fields.push_back(std::move(field));
          field.clear();
          break;
        case '\r':
          if (in_.peek() == '\n') in_.get();
          ++current_line_;
          row_done = true;
          break;
        case '\n':
          ++current_line_;
          row_done = true;
          break;
        default:
          field.push_back(ch);
      }
    }
    if (!row_done) c = in_.get();
  }
  fields.push_back(std::move(field));
  return true;
}

}  // namespace humor::csv
