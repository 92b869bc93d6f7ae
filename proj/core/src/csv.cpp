#include "i8t/csv.hpp"

#include <cstdio>
#include <stdexcept>

namespace i8t {

std::string fmt_sig9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), columns_(header.size()) {
  if (!out_) throw std::runtime_error("cannot open for writing: " + path);
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw std::invalid_argument("CsvWriter: column count mismatch");
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

}  // namespace i8t
