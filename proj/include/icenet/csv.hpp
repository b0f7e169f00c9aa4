#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "icenet/error.hpp"

namespace icenet {

/// Shortest round-trip-safe rendering used in every report ("%.9g").
inline std::string fmt_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { line(header); }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw ArgumentError("csv: row has wrong number of cells");
    line(cells);
  }

  const std::string str() const { return os_.str(); }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ResolutionError(path);
    f << os_.str();
  }

 private:
  void line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }

  std::size_t columns_;
  std::ostringstream os_;
};

}  // namespace icenet
