#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace vio {

struct CsvRow {
  int line{0};  // 1-based line in the source file
  std::vector<double> values;
};

/**
 * Reads a numeric CSV file. Blank lines and lines starting with '#' are
 * skipped; the first remaining line must equal `header`. Throws
 * DatasetFormatError naming the file and line on any malformed row.
 */
std::vector<CsvRow> read_numeric_csv(const std::filesystem::path& path, const std::vector<std::string>& header);

/// Splits one CSV line on commas, trimming surrounding whitespace.
std::vector<std::string> split_csv_line(const std::string& line);

/// Fixed-precision formatting for byte-stable output.
std::string fixed(double value, int precision = 9);

}  // namespace vio
