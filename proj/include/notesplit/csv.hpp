#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace notesplit::csv {

/// RFC-4180 reader: quoted fields may contain commas, quotes ("") and
/// newlines. Tracks the 1-based row number of the last row returned.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Next row, or nullopt at end of input. Throws on an unterminated quote.
  std::optional<std::vector<std::string>> next();

  std::size_t row() const { return row_; }

 private:
  std::istream& in_;
  std::size_t row_ = 0;
};

std::string quote(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace notesplit::csv
