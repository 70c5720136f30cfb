#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "spamm/error.hpp"
#include "spamm/io.hpp"

namespace spamm::io {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

[[noreturn]] void malformed(const fs::path &path, const std::string &why) {
  throw IoError(path.string() + ": " + why);
}

} // namespace

DenseMatrix read_matrix_market(const fs::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line))
    malformed(path, "empty file");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (tag != "%%MatrixMarket" || lower(object) != "matrix")
    malformed(path, "missing %%MatrixMarket matrix header");
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (format != "coordinate" && format != "array")
    malformed(path, "unsupported format '" + format + "'");
  if (field != "real" && field != "double" && field != "integer")
    malformed(path, "field '" + field + "' is not real");
  if (symmetry != "general" && symmetry != "symmetric")
    malformed(path, "unsupported symmetry '" + symmetry + "'");
  const bool symmetric = symmetry == "symmetric";

  while (std::getline(in, line))
    if (!line.empty() && line[0] != '%' &&
        line.find_first_not_of(" \t\r") != std::string::npos)
      break;
  std::istringstream size_line(line);
  long rows = 0, cols = 0, entries = 0;
  if (!(size_line >> rows >> cols))
    malformed(path, "bad size line");
  if (format == "coordinate" && !(size_line >> entries))
    malformed(path, "bad size line");
  if (rows < 1 || rows != cols)
    malformed(path, "matrix must be square and nonempty");
  if (entries < 0)
    malformed(path, "negative entry count");

  DenseMatrix m = DenseMatrix::Zero(rows, cols);
  if (format == "coordinate") {
    for (long e = 0; e < entries; ++e) {
      long i = 0, j = 0;
      double v = 0.0;
      if (!(in >> i >> j >> v))
        malformed(path, "expected " + std::to_string(entries) +
                            " entries, read " + std::to_string(e));
      if (i < 1 || i > rows || j < 1 || j > cols)
        malformed(path, "index (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") out of range");
      m(i - 1, j - 1) = v;
      if (symmetric)
        m(j - 1, i - 1) = v;
    }
  } else {
    // Column-major; symmetric arrays list the lower triangle only.
    for (long j = 0; j < cols; ++j)
      for (long i = symmetric ? j : 0; i < rows; ++i) {
        double v = 0.0;
        if (!(in >> v))
          malformed(path, "truncated array data");
        m(i, j) = v;
        if (symmetric)
          m(j, i) = v;
      }
  }
  if (!m.allFinite())
    malformed(path, "non-finite entry");
  return m;
}

void write_matrix_market(const DenseMatrix &m, const fs::path &path,
                         bool symmetric) {
  if (m.rows() != m.cols())
    throw ShapeError("write_matrix_market: matrix must be square");
  std::vector<std::string> lines;
  char buf[96];
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = symmetric ? j : 0; i < m.rows(); ++i)
      if (m(i, j) != 0.0) {
        std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n",
                      static_cast<long>(i + 1), static_cast<long>(j + 1),
                      m(i, j));
        lines.emplace_back(buf);
      }
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << "%%MatrixMarket matrix coordinate real "
      << (symmetric ? "symmetric" : "general") << '\n'
      << m.rows() << ' ' << m.cols() << ' ' << lines.size() << '\n';
  for (const auto &l : lines)
    out << l;
  if (!out)
    throw IoError("write failed for " + path.string());
}

bool is_symmetric(const DenseMatrix &m, double rel_tol) {
  if (m.rows() != m.cols())
    return false;
  return (m - m.transpose()).norm() <= rel_tol * m.norm();
}

} // namespace spamm::io
