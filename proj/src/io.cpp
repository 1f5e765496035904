#include "mdelab/io.hpp"

#include <cstdio>

namespace mdelab {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

CsvWriter& CsvWriter::col(const std::string& name, const RVector& values) {
  std::vector<std::string> c;
  c.reserve(values.size());
  for (int i = 0; i < values.size(); ++i)
    c.push_back(format_double(values[i]));
  names_.push_back(name);
  cols_.push_back(std::move(c));
  return *this;
}

CsvWriter& CsvWriter::col(const std::string& name,
                          const std::vector<double>& values) {
  std::vector<std::string> c;
  c.reserve(values.size());
  for (double v : values) c.push_back(format_double(v));
  names_.push_back(name);
  cols_.push_back(std::move(c));
  return *this;
}

CsvWriter& CsvWriter::col(const std::string& name,
                          const std::vector<int>& values) {
  std::vector<std::string> c;
  c.reserve(values.size());
  for (int v : values) c.push_back(std::to_string(v));
  names_.push_back(name);
  cols_.push_back(std::move(c));
  return *this;
}

void CsvWriter::write(const std::filesystem::path& path) const {
  if (names_.empty()) throw SchemaError("csv: no columns");
  const std::size_t rows = cols_.front().size();
  for (const auto& c : cols_)
    if (c.size() != rows) throw SchemaError("csv: column length mismatch");

  std::string out;
  for (std::size_t j = 0; j < names_.size(); ++j) {
    if (j) out += ',';
    out += names_[j];
  }
  out += "\r\n";
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols_.size(); ++j) {
      if (j) out += ',';
      out += cols_[j][i];
    }
    out += "\r\n";
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw SchemaError("csv: cannot open " + path.string());
  f.write(out.data(), std::streamsize(out.size()));
}

void write_plot_script(const std::filesystem::path& dir,
                       const std::string& name, const std::string& csv,
                       const std::string& xcol, const std::string& ycol,
                       const std::string& title, bool logscale) {
  std::string s;
  s += "#!/usr/bin/env gnuplot\n";
  s += "# standalone plot script; run from this directory\n";
  s += "set datafile separator ','\n";
  s += "set key autotitle columnhead\n";
  s += "set title '" + title + "'\n";
  s += "set xlabel '" + xcol + "'\n";
  s += "set ylabel '" + ycol + "'\n";
  if (logscale) s += "set logscale xy\n";
  s += "set terminal pngcairo size 900,600\n";
  s += "set output '" + name + ".png'\n";
  s += "plot '" + csv + "' using '" + xcol + "':'" + ycol +
       "' with linespoints\n";
  std::ofstream f(dir / (name + ".gp"), std::ios::binary);
  if (!f) throw SchemaError("plot: cannot open script file");
  f.write(s.data(), std::streamsize(s.size()));
}

}  // namespace mdelab
