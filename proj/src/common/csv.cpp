#include "vio/common/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "vio/common/error.hpp"

namespace vio {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void fail(const std::filesystem::path& path, int line, const std::string& what) {
  throw Error(ErrorCode::DatasetFormatError,
              path.filename().string() + " line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<CsvRow> read_numeric_csv(const std::filesystem::path& path, const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::DatasetFormatError, "cannot open " + path.string());
  }
  std::vector<CsvRow> rows;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const std::vector<std::string> fields = split_csv_line(t);
    if (!header_seen) {
      if (fields != header) fail(path, line_no, "unexpected header '" + t + "'");
      header_seen = true;
      continue;
    }
    if (fields.size() != header.size()) {
      fail(path, line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                              std::to_string(fields.size()));
    }
    CsvRow row;
    row.line = line_no;
    row.values.reserve(fields.size());
    for (const std::string& f : fields) {
      try {
        std::size_t pos = 0;
        const double v = std::stod(f, &pos);
        if (pos != f.size() || !std::isfinite(v)) throw std::invalid_argument(f);
        row.values.push_back(v);
      } catch (const std::exception&) {
        fail(path, line_no, "bad numeric field '" + f + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (!header_seen) fail(path, line_no, "missing header row");
  return rows;
}

std::string fixed(double value, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, value == 0.0 ? 0.0 : value);
  return buf;
}

}  // namespace vio
