#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cfd::csv {

struct Row {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the record starts
};

// RFC-4180 reader: quoted fields may contain separators, doubled quotes and
// line breaks. A trailing newline does not produce an empty record.
std::vector<Row> parse(std::string_view text, char sep = ',');

std::string escape_field(std::string_view field, char sep = ',');
std::string format_row(const std::vector<std::string>& fields, char sep = ',');

// Header lookup: column name -> index. Throws FormatError naming the missing
// column.
class Header {
 public:
  explicit Header(const Row& row);
  std::size_t require(std::string_view name) const;
  bool has(std::string_view name) const;
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
};

}  // namespace cfd::csv
