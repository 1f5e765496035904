#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "mdelab/common.hpp"

namespace mdelab {

// minimal CSV writer: header row, numeric columns, CRLF line ends, values in
// round-trippable %.17g; columns must share length
class CsvWriter {
 public:
  CsvWriter& col(const std::string& name, const RVector& values);
  CsvWriter& col(const std::string& name, const std::vector<double>& values);
  CsvWriter& col(const std::string& name, const std::vector<int>& values);
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> cols_;
};

std::string format_double(double v);  // %.17g
uint64_t fnv1a64(const std::string& bytes);

// gnuplot-friendly plot script next to a CSV (kept dependency-free)
void write_plot_script(const std::filesystem::path& dir,
                       const std::string& name, const std::string& csv,
                       const std::string& xcol, const std::string& ycol,
                       const std::string& title, bool logscale = false);

}  // namespace mdelab
