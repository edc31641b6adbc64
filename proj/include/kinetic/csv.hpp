#pragma once

#include <fstream>
#include <string>
#include <variant>
#include <vector>

namespace kinetic {

using CsvCell = std::variant<double, long long, std::string>;

// Shortest round-trip decimal form; independent of the global locale.
std::string format_number(double x);

// RFC-4180 writer: header row, CRLF line ends, fields quoted only when needed.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<CsvCell>& cells);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  size_t columns_;
  void line(const std::vector<std::string>& fields);
};

std::string csv_escape(const std::string& field);

// Reads an RFC-4180 file into rows of fields.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

}  // namespace kinetic
