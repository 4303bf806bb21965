#pragma once

#include <istream>
#include <string>
#include <vector>

namespace ccm {

// Minimal RFC-4180-ish CSV: quoted fields with embedded commas/quotes are
// supported, multi-line fields are not (none of our formats need them).
std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_escape(const std::string& field);
std::string join_csv(const std::vector<std::string>& fields);

struct CsvFile {
  std::vector<std::string> comments;  // leading '#' lines (manifest carriers)
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;  // 1-based source line per row
};

CsvFile read_csv(std::istream& in);
CsvFile read_csv_file(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace ccm
