#pragma once

#include <Eigen/Core>

#include <vector>

namespace tvsbl {

// ||x_hat - x||_F^2 / ||x||_F^2; the ground truth must be nonzero.
double nmse(const Eigen::MatrixXd& x_hat, const Eigen::MatrixXd& x);

// Indices of the k rows with largest Euclidean norm, ties broken by lower
// index. Returned sorted ascending.
std::vector<int> top_k_support(const Eigen::MatrixXd& x_hat, int k);

// Rows whose Euclidean norm exceeds the threshold.
std::vector<int> threshold_support(const Eigen::MatrixXd& x_hat, double threshold);

// Harmonic mean of support precision and recall; 0 when there are no true
// positives. Inputs are sets of row indices (duplicates ignored).
double f1_score(const std::vector<int>& estimated, const std::vector<int>& truth);

}  // namespace tvsbl
