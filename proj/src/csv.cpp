#include "lidarnav/csv.hpp"

#include <charconv>

#include "lidarnav/errors.hpp"

namespace lidarnav {

CsvWriter::CsvWriter(const std::string& path) : os_(path), path_(path) {
  if (!os_) throw DataError("csv: cannot open " + path);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os_ << ',';
    os_ << cells[i];
  }
  os_ << '\n';
  if (!os_) throw DataError("csv: write failed for " + path_);
}

std::string csv_num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, end);
}

std::string csv_num(std::int64_t v) {
  char buf[24];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, end);
}

}  // namespace lidarnav
