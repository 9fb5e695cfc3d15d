#include "tvsbl/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "tvsbl/errors.hpp"

namespace tvsbl {

double nmse(const Eigen::MatrixXd& x_hat, const Eigen::MatrixXd& x) {
  require(x_hat.rows() == x.rows() && x_hat.cols() == x.cols(),
          "estimate and ground truth shapes differ");
  require_finite(x_hat, "estimate");
  require_finite(x, "ground truth");
  const double denom = x.squaredNorm();
  if (denom <= 0.0) throw InputError("ground truth is identically zero");
  return (x_hat - x).squaredNorm() / denom;
}

std::vector<int> top_k_support(const Eigen::MatrixXd& x_hat, int k) {
  require(k >= 0 && k <= x_hat.rows(), "k must lie in [0, rows]");
  require_finite(x_hat, "estimate");
  const Eigen::VectorXd norms = x_hat.rowwise().norm();

  std::vector<int> order(static_cast<std::size_t>(x_hat.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (norms[a] != norms[b]) return norms[a] > norms[b];
    return a < b;  // ties to the lower index
  });

  std::vector<int> support(order.begin(), order.begin() + k);
  std::sort(support.begin(), support.end());
  return support;
}

std::vector<int> threshold_support(const Eigen::MatrixXd& x_hat, double threshold) {
  require_finite(x_hat, "estimate");
  require_finite(threshold, "threshold");
  std::vector<int> support;
  for (Eigen::Index r = 0; r < x_hat.rows(); ++r)
    if (x_hat.row(r).norm() > threshold) support.push_back(static_cast<int>(r));
  return support;
}

double f1_score(const std::vector<int>& estimated, const std::vector<int>& truth) {
  const std::set<int> est(estimated.begin(), estimated.end());
  const std::set<int> tru(truth.begin(), truth.end());

  std::size_t tp = 0;
  for (int i : est) tp += tru.count(i);
  const std::size_t fa = est.size() - tp;
  const std::size_t mis = tru.size() - tp;
  if (tp == 0) return 0.0;

  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fa);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + mis);
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace tvsbl
