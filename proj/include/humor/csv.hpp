#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace humor::csv {

// RFC-4180 style quoting: fields containing commas, quotes, or newlines are
// wrapped in double quotes with embedded quotes doubled.
std::string escape(std::string_view field);

void write_row(std::ostream& out, std::span<const std::string> fields);

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Reads one logical row (quoted fields may span physical lines).
  // Returns false at end of input.
  bool next(std::vector<std::string>& fields);

  // 1-based line number of the first physical line of the last row read.
  std::size_t line() const { return row_start_line_; }

 private:
  std::istream& in_;
  std::size_t current_line_ = 0;
  std::size_t row_start_line_ = 0;
};

}  // namespace humor::csv
