#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace i8t {

// Floats in emitted CSVs carry 9 significant digits.
std::string fmt_sig9(double v);

// Comma separated, LF line endings, header row mandatory.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  void row(const std::vector<std::string>& cells);
  void flush() { out_.flush(); }
  bool good() const { return out_.good(); }

 private:
  std::ofstream out_;
  size_t columns_;
};

}  // namespace i8t
