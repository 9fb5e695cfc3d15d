#include "tvsbl/matrix_io.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "tvsbl/errors.hpp"

namespace tvsbl {

Eigen::MatrixXd read_matrix(std::istream& in, const std::string& context) {
  long long rows = 0;
  long long cols = 0;
  if (!(in >> rows >> cols)) throw IoError(context + ": missing 'rows cols' header");
  if (rows < 1 || cols < 1) throw IoError(context + ": header dimensions must be positive");

  Eigen::MatrixXd m(rows, cols);
  for (long long r = 0; r < rows; ++r) {
    for (long long c = 0; c < cols; ++c) {
      double value = 0.0;
      if (!(in >> value))
        throw IoError(context + ": truncated matrix body, expected " +
                      std::to_string(rows * cols) + " values");
      m(r, c) = value;
    }
  }
  return m;
}

Eigen::MatrixXd load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_matrix(in, path);
}

void write_matrix(const Eigen::MatrixXd& m, std::ostream& out) {
  out << m.rows() << ' ' << m.cols() << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << m(r, c);
    }
    out << '\n';
  }
}

void save_matrix(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_matrix(m, out);
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace tvsbl
