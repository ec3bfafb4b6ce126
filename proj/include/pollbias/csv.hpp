#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pollbias::csv {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Row = std::vector<std::string>;

/// A parsed CSV table. The first record is the header; `line` gives the
/// 1-based physical line where each data row starts.
struct Table {
  Row header;
  std::vector<Row> rows;
  std::vector<std::size_t> lines;

  std::optional<std::size_t> column(std::string_view name) const;
  std::size_t require_column(std::string_view name) const;
};

// RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerated, UTF-8 BOM stripped.
Table parse(std::string_view text);
Table read_file(const std::string& path);

std::string quote(std::string_view field);
void write_row(std::ostream& out, const Row& row);

// Shortest round-trip representation for doubles written to CSV/JSON.
std::string format_double(double value);

}  // namespace pollbias::csv
