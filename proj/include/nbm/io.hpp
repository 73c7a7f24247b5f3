// File formats: CSV tables and a small binary matrix container
// (magic + version + shape header + row-major doubles).
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nbm/common.hpp"

namespace nbm::io {

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    return -1;
  }
  Vector column(const std::string& name) const {
    const int c = column_index(name);
    require(c >= 0, "CSV is missing column '" + name + "'");
    Vector v(static_cast<Index>(rows.size()));
    for (size_t r = 0; r < rows.size(); ++r) v[static_cast<Index>(r)] = rows[r][c];
    return v;
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open CSV file '" + path + "'");
  CsvTable t;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "empty CSV file '" + path + "'");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(t.columns.size());
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    require(row.size() == t.columns.size(), "ragged CSV row in '" + path + "'");
    t.rows.push_back(std::move(row));
  }
  return t;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns)
      : out_(path), ncols_(columns.size()) {
    require(out_.good(), "cannot open '" + path + "' for writing");
    out_ << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (size_t i = 0; i < columns.size(); ++i)
      out_ << columns[i] << (i + 1 < columns.size() ? "," : "\n");
  }
  void row(const std::vector<double>& values) {
    for (size_t i = 0; i < values.size(); ++i)
      out_ << values[i] << (i + 1 < ncols_ ? "," : "\n");
  }

 private:
  std::ofstream out_;
  size_t ncols_;
};

// ---------------------------------------------------------------------------
// Binary matrix container

inline constexpr char kMatrixMagic[8] = {'N', 'B', 'M', 'M', 'A', 'T', '0', '1'};

inline void write_matrix(std::ostream& out, const Matrix& m) {
  out.write(kMatrixMagic, 8);
  const std::int64_t r = m.rows(), c = m.cols();
  out.write(reinterpret_cast<const char*>(&r), 8);
  out.write(reinterpret_cast<const char*>(&c), 8);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
}

inline Matrix read_matrix(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  require(in.good() && std::memcmp(magic, kMatrixMagic, 8) == 0,
          "bad matrix container header");
  std::int64_t r = 0, c = 0;
  in.read(reinterpret_cast<char*>(&r), 8);
  in.read(reinterpret_cast<char*>(&c), 8);
  require(r >= 0 && c >= 0, "bad matrix container shape");
  Matrix m(r, c);
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < c; ++j) {
      double v;
      in.read(reinterpret_cast<char*>(&v), 8);
      m(i, j) = v;
    }
  require(in.good(), "truncated matrix container");
  return m;
}

inline void save_matrix(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open '" + path + "' for writing");
  write_matrix(out, m);
}

inline Matrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open '" + path + "'");
  return read_matrix(in);
}

inline void write_vector(std::ostream& out, const Vector& v) {
  write_matrix(out, Matrix(v));
}

inline Vector read_vector(std::istream& in) {
  Matrix m = read_matrix(in);
  require(m.cols() == 1, "expected a column vector");
  return Vector(m.col(0));
}

// POD helpers for binary model files.
template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(in.good(), "truncated binary stream");
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  const auto n = read_pod<std::uint64_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  require(in.good(), "truncated binary stream");
  return s;
}

}  // namespace nbm::io
