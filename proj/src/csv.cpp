#include "histgeo/csv.hpp"

namespace histgeo {

CsvError::CsvError(std::size_t line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.fields.size(); ++i) {
    if (header.fields[i] == name) return i;
  }
  return std::nullopt;
}

std::vector<CsvRecord> parse_csv(std::string_view text, char delimiter) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<CsvRecord> out;
  std::size_t i = 0;
  std::size_t line = 1;
  while (i < text.size()) {
    CsvRecord rec;
    rec.line = line;
    const std::size_t start = i;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    bool ended = false;
    while (i < text.size()) {
      const char c = text[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field.push_back('"');
            i += 2;
          } else {
            quoted = false;
            ++i;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
          ++i;
        }
        continue;
      }
      if (c == '"' && field.empty() && !was_quoted) {
        quoted = was_quoted = true;
        ++i;
      } else if (c == delimiter) {
        rec.fields.push_back(std::move(field));
        field.clear();
        was_quoted = false;
        ++i;
      } else if (c == '\n' || (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n')) {
        rec.raw = std::string(text.substr(start, i - start));
        i += c == '\r' ? 2 : 1;
        ++line;
        ended = true;
        break;
      } else {
        field.push_back(c);
        ++i;
      }
    }
    if (quoted) throw CsvError(rec.line, "unterminated quoted field");
    if (!ended) rec.raw = std::string(text.substr(start));
    rec.fields.push_back(std::move(field));
    if (rec.raw.empty()) continue;
    out.push_back(std::move(rec));
  }
  return out;
}

CsvTable parse_csv_table(std::string_view text, char delimiter) {
  auto records = parse_csv(text, delimiter);
  if (records.empty()) throw CsvError(1, "missing header row");
  CsvTable t;
  t.header = std::move(records.front());
  t.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
  return t;
}

std::string csv_escape(std::string_view field, char delimiter) {
  if (field.find_first_of(std::string{'"', '\n', '\r', delimiter}) == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string csv_join(const std::vector<std::string>& fields, char delimiter) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(delimiter);
    out += csv_escape(fields[i], delimiter);
  }
  return out;
}

}  // namespace histgeo
