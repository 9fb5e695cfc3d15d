#include "tvsbl/regularizers.hpp"

#include <cmath>
#include <sstream>

#include "tvsbl/errors.hpp"

namespace tvsbl {

double linear_tv(const Eigen::VectorXd& gamma) {
  require(gamma.size() >= 1, "linear_tv needs a non-empty vector");
  require_finite(gamma, "gamma");
  const Eigen::Index n = gamma.size();
  if (n == 1) return 0.0;
  return (gamma.tail(n - 1) - gamma.head(n - 1)).cwiseAbs().sum();
}

double log_tv(const Eigen::VectorXd& gamma, double epsilon) {
  require(gamma.size() >= 1, "log_tv needs a non-empty vector");
  require(epsilon > 0.0, "epsilon must be positive");
  require_finite(gamma, "gamma");
  const Eigen::Index n = gamma.size();
  if (n == 1) return 0.0;
  return ((gamma.tail(n - 1) - gamma.head(n - 1)).cwiseAbs().array() + epsilon).log().sum();
}

Eigen::VectorXd log_tv_reweights(const Eigen::VectorXd& gamma_prev, double epsilon) {
  require(gamma_prev.size() >= 2, "reweights need at least two components");
  require(epsilon > 0.0, "epsilon must be positive");
  require_finite(gamma_prev, "gamma");
  const Eigen::Index n = gamma_prev.size();
  return ((gamma_prev.tail(n - 1) - gamma_prev.head(n - 1)).cwiseAbs().array() + epsilon)
      .inverse();
}

TVRegularizer TVRegularizer::linear(double beta) {
  require(beta >= 0.0, "beta must be non-negative");
  return TVRegularizer(Kind::Linear, beta, kDefaultEpsilon);
}

TVRegularizer TVRegularizer::log(double beta, double epsilon) {
  require(beta >= 0.0, "beta must be non-negative");
  require(epsilon > 0.0, "epsilon must be positive");
  return TVRegularizer(Kind::Log, beta, epsilon);
}

double TVRegularizer::penalty(const Eigen::VectorXd& gamma) const {
  switch (kind_) {
    case Kind::None:
      return 0.0;
    case Kind::Linear:
      return beta_ * linear_tv(gamma);
    case Kind::Log:
      return beta_ * log_tv(gamma, epsilon_);
  }
  return 0.0;
}

std::string TVRegularizer::describe() const {
  std::ostringstream out;
  switch (kind_) {
    case Kind::None:
      out << "none";
      break;
    case Kind::Linear:
      out << "linear-tv(beta=" << beta_ << ")";
      break;
    case Kind::Log:
      out << "log-tv(beta=" << beta_ << ",eps=" << epsilon_ << ")";
      break;
  }
  return out.str();
}

}  // namespace tvsbl
