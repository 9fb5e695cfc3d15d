#include "tvsbl/model.hpp"

#include <cmath>

#include "tvsbl/errors.hpp"

namespace tvsbl {

namespace {

void check_gamma(const Eigen::VectorXd& gamma, Eigen::Index atoms) {
  require(gamma.size() == atoms, "gamma length must match dictionary atom count");
  require_finite(gamma, "gamma");
  if ((gamma.array() < 0.0).any()) throw InputError("gamma has negative components");
}

void check_lambda(double lambda) {
  require_finite(lambda, "noise variance");
  if (lambda <= 0.0) throw InputError("noise variance must be positive");
}

void check_measurements(const Dictionary& dict, const MeasurementSet& data) {
  require(data.y.rows() == dict.measurements(),
          "measurement rows must match dictionary measurement count");
  require(data.snapshots() >= 1, "at least one snapshot required");
  require_finite(data.y, "measurements");
  check_lambda(data.noise_variance);
}

}  // namespace

MeasurementFactor::MeasurementFactor(const Eigen::MatrixXd& a, const Eigen::VectorXd& gamma,
                                     double lambda) {
  Eigen::MatrixXd sigma = (a * gamma.asDiagonal()) * a.transpose();
  sigma.diagonal().array() += lambda;
  llt_.compute(sigma);
  if (llt_.info() != Eigen::Success)
    throw InternalError("measurement covariance factorization failed");
  log_det_ = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

double MeasurementFactor::quadratic_sum(const Eigen::MatrixXd& y) const {
  return (y.array() * llt_.solve(y).array()).sum();
}

Eigen::MatrixXd measurement_covariance(const Dictionary& dict, const Hyperparameters& hyper,
                                       double lambda) {
  require(dict.measurements() >= 1 && dict.atoms() >= 1, "dictionary must be non-empty");
  require_finite(dict.entries, "dictionary");
  check_gamma(hyper.gamma, dict.atoms());
  check_lambda(lambda);

  Eigen::MatrixXd sigma = (dict.entries * hyper.gamma.asDiagonal()) * dict.entries.transpose();
  sigma.diagonal().array() += lambda;
  Eigen::MatrixXd sym = 0.5 * (sigma + sigma.transpose());
  return sym;
}

Posterior posterior(const Dictionary& dict, const MeasurementSet& data,
                    const Hyperparameters& hyper) {
  require_finite(dict.entries, "dictionary");
  check_measurements(dict, data);
  check_gamma(hyper.gamma, dict.atoms());

  const Eigen::MatrixXd& a = dict.entries;
  const Eigen::VectorXd& gamma = hyper.gamma;
  MeasurementFactor factor(a, gamma, data.noise_variance);

  Eigen::MatrixXd a_gamma = a * gamma.asDiagonal();  // M x N
  Eigen::MatrixXd cov =
      Eigen::MatrixXd(gamma.asDiagonal()) - a_gamma.transpose() * factor.solve(a_gamma);

  Posterior post;
  post.covariance = 0.5 * (cov + cov.transpose());
  post.means = a_gamma.transpose() * factor.solve(data.y);
  return post;
}

double sbl_cost(const Dictionary& dict, const MeasurementSet& data, const Hyperparameters& hyper,
                const TVRegularizer& reg) {
  require_finite(dict.entries, "dictionary");
  check_measurements(dict, data);
  check_gamma(hyper.gamma, dict.atoms());

  MeasurementFactor factor(dict.entries, hyper.gamma, data.noise_variance);
  return static_cast<double>(data.snapshots()) * factor.log_det() +
         factor.quadratic_sum(data.y) + reg.penalty(hyper.gamma);
}

namespace detail {

Eigen::MatrixXd posterior_means(const Eigen::MatrixXd& a, const Eigen::VectorXd& gamma,
                                const Eigen::MatrixXd& y, const MeasurementFactor& factor) {
  return gamma.asDiagonal() * (a.transpose() * factor.solve(y));
}

}  // namespace detail

}  // namespace tvsbl
