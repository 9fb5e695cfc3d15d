#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "tvsbl/regularizers.hpp"

namespace tvsbl {

// M x N sensing matrix. Generated dictionaries have unit-norm columns;
// matrices loaded from file need not.
struct Dictionary {
  Eigen::MatrixXd entries;

  Eigen::Index measurements() const { return entries.rows(); }
  Eigen::Index atoms() const { return entries.cols(); }
};

// M x L observations, one snapshot per column, plus the per-component noise
// variance lambda (> 0).
struct MeasurementSet {
  Eigen::MatrixXd y;
  double noise_variance = 1.0;

  Eigen::Index snapshots() const { return y.cols(); }
};

// Per-row prior variances, componentwise >= 0.
struct Hyperparameters {
  Eigen::VectorXd gamma;
};

// Gaussian posterior of the signals given the measurements: per-snapshot
// means and the covariance shared across snapshots.
struct Posterior {
  Eigen::MatrixXd means;       // N x L
  Eigen::MatrixXd covariance;  // N x N, symmetric PSD
};

// Cholesky factorization of Sigma_y = lambda*I + A*diag(gamma)*A^T together
// with the quantities every solver derives from it. lambda > 0 keeps the
// matrix positive definite, so no pseudo-inverse is ever needed.
class MeasurementFactor {
 public:
  MeasurementFactor(const Eigen::MatrixXd& a, const Eigen::VectorXd& gamma, double lambda);

  double log_det() const { return log_det_; }

  // Sigma_y^{-1} * rhs
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return llt_.solve(rhs); }

  // sum_l y_l^T Sigma_y^{-1} y_l
  double quadratic_sum(const Eigen::MatrixXd& y) const;

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_det_ = 0.0;
};

// lambda*I + A*diag(gamma)*A^T, dense and symmetric.
Eigen::MatrixXd measurement_covariance(const Dictionary& dict, const Hyperparameters& hyper,
                                       double lambda);

// Posterior moments evaluated through the Gamma-multiplied identities
//   covariance = Gamma - Gamma A^T Sigma_y^{-1} A Gamma
//   means      = Gamma A^T Sigma_y^{-1} Y
// so gamma_i = 0 yields exactly zero rows instead of dividing by gamma.
Posterior posterior(const Dictionary& dict, const MeasurementSet& data,
                    const Hyperparameters& hyper);

// Generalized Type-II cost:
//   L*logdet(Sigma_y) + sum_l y_l^T Sigma_y^{-1} y_l + beta*T(gamma).
double sbl_cost(const Dictionary& dict, const MeasurementSet& data, const Hyperparameters& hyper,
                const TVRegularizer& reg);

namespace detail {

// N x L posterior means computed from an existing factorization.
Eigen::MatrixXd posterior_means(const Eigen::MatrixXd& a, const Eigen::VectorXd& gamma,
                                const Eigen::MatrixXd& y, const MeasurementFactor& factor);

}  // namespace detail

}  // namespace tvsbl
