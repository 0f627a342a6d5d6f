#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tbme/dataset.hpp"

namespace tbme {

/// Parse failure with the offending 1-based row.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long row)
      : std::runtime_error(what + " (row " + std::to_string(row) + ")"), row_(row) {}
  long row() const { return row_; }

 private:
  long row_;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Writes one point per line, comma-separated, 17 significant digits.
/// With header=true the first line is "x0,...,x{D-1}".
inline void write_csv(const PointCloud& cloud, const std::string& path, bool header = false) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  const int D = cloud.ambient_dim();
  if (header) {
    for (int j = 0; j < D; ++j) out << (j ? ",x" : "x") << j;
    out << "\n";
  }
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    for (int j = 0; j < D; ++j) {
      if (j) out << ',';
      out << detail::format_double(cloud.points(i, j));
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

/// Reads a numeric CSV with a constant column count; a leading "x0,..."
/// header line is skipped. intrinsic_dim is the caller-declared d.
inline PointCloud read_csv(const std::string& path, int intrinsic_dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  int cols = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("x0", 0) == 0) continue;  // header
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &pos);
      } catch (const std::exception&) {
        throw ParseError("read_csv: non-numeric cell '" + cell + "'", lineno);
      }
      while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
      if (pos != cell.size())
        throw ParseError("read_csv: trailing garbage in cell '" + cell + "'", lineno);
      row.push_back(v);
    }
    if (cols < 0) cols = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != cols)
      throw ParseError("read_csv: inconsistent column count", lineno);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("read_csv: no points in " + path);
  PointCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(rows.size()), cols);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < cols; ++j) cloud.points(static_cast<Eigen::Index>(i), j) = rows[i][j];
  cloud.intrinsic_dim = intrinsic_dim;
  cloud.source = "file";
  cloud.validate();
  return cloud;
}

}  // namespace tbme
