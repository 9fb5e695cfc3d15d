#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <string>

namespace tvsbl {

// Plain-text matrix format: a header line "rows cols", then the entries in
// row-major order, whitespace separated. Writers emit one row per line with
// enough digits to round-trip doubles exactly.
Eigen::MatrixXd read_matrix(std::istream& in, const std::string& context);
Eigen::MatrixXd load_matrix(const std::string& path);
void write_matrix(const Eigen::MatrixXd& m, std::ostream& out);
void save_matrix(const Eigen::MatrixXd& m, const std::string& path);

}  // namespace tvsbl
