#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace histgeo {

class CsvError : public std::runtime_error {
public:
  CsvError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

struct CsvRecord {
  std::vector<std::string> fields;
  std::string raw;        // exact input text of the record, without its line break
  std::size_t line = 0;   // 1-based line the record starts on
};

/// Header row plus data rows. Blank lines are skipped.
struct CsvTable {
  CsvRecord header;
  std::vector<CsvRecord> rows;

  std::optional<std::size_t> column(std::string_view name) const;
};

/// RFC 4180 records: quoted fields may hold delimiters, doubled quotes and
/// line breaks. Accepts LF or CRLF; a leading UTF-8 BOM is dropped.
std::vector<CsvRecord> parse_csv(std::string_view text, char delimiter = ',');

/// Throws CsvError when the text has no header.
CsvTable parse_csv_table(std::string_view text, char delimiter = ',');

std::string csv_escape(std::string_view field, char delimiter = ',');
std::string csv_join(const std::vector<std::string>& fields, char delimiter = ',');

}  // namespace histgeo
