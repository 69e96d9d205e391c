#ifndef LPS_CSV_HPP
#define LPS_CSV_HPP

// Minimal CSV output with a fixed number format, so equal results produce
// byte-identical files.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace lps {

// "%.10g"; NaN becomes an empty cell.
std::string csv_number(double v);

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

// Splits a plain CSV line (no quoting).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace lps

#endif
