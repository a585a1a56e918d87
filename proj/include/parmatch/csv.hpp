#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace parmatch {

// One parsed record plus the 1-based line number it started on.
struct CsvRecord {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

// RFC 4180-style reader with a configurable delimiter. Fields may be
// quoted; quoted fields may contain the delimiter, doubled quotes and
// newlines. Throws LoadError naming the line on framing errors.
std::vector<CsvRecord> read_csv(std::istream& in, char delimiter = ',');

// Quotes a field only when it contains the delimiter, a quote or a line
// break, doubling embedded quotes.
std::string csv_escape(const std::string& field, char delimiter = ',');

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields,
                   char delimiter = ',');

}  // namespace parmatch
