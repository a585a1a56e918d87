#include "parmatch/csv.hpp"

#include <istream>
#include <ostream>

#include "parmatch/error.hpp"

namespace parmatch {

std::vector<CsvRecord> read_csv(std::istream& in, char delimiter) {
  std::vector<CsvRecord> records;
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());

  std::size_t line = 1;
  std::size_t i = 0;
  while (i < data.size()) {
    CsvRecord record;
    record.line = line;
    std::string field;
    bool in_quotes = false;
    bool quoted_field = false;
    bool done = false;
    while (!done) {
      if (i >= data.size()) {
        if (in_quotes) {
          throw LoadError("line " + std::to_string(record.line) +
                          ": unterminated quoted field");
        }
        break;
      }
      char c = data[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < data.size() && data[i + 1] == '"') {
            field.push_back('"');
            i += 2;
          } else {
            in_quotes = false;
            ++i;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
          ++i;
        }
        continue;
      }
      if (c == '"') {
        if (!field.empty() || quoted_field) {
          throw LoadError("line " + std::to_string(line) +
                          ": quote inside unquoted field");
        }
        in_quotes = true;
        quoted_field = true;
        ++i;
      } else if (c == delimiter) {
        record.fields.push_back(std::move(field));
        field.clear();
        quoted_field = false;
        ++i;
      } else if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') {
        i += 2;
        ++line;
        done = true;
      } else if (c == '\n') {
        ++i;
        ++line;
        done = true;
      } else {
        field.push_back(c);
        ++i;
      }
    }
    record.fields.push_back(std::move(field));
    // Skip blank separator lines (a lone newline yields one empty field).
    if (record.fields.size() == 1 && record.fields[0].empty()) continue;
    records.push_back(std::move(record));
  }
  return records;
}

std::string csv_escape(const std::string& field, char delimiter) {
  bool needs_quotes = field.find_first_of("\"\r\n") != std::string::npos ||
                      field.find(delimiter) != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields,
                   char delimiter) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out.put(delimiter);
    out << csv_escape(fields[i], delimiter);
  }
  out.put('\n');
}

}  // namespace parmatch
