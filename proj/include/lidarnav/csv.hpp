#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace lidarnav {

// Minimal CSV emitter: comma-separated, newline-terminated rows. Cells are
// written verbatim; numeric cells should go through csv_num.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream os_;
  std::string path_;
};

// Shortest round-trip decimal rendering of a double.
std::string csv_num(double v);
std::string csv_num(std::int64_t v);

}  // namespace lidarnav
