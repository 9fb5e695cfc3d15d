#pragma once

#include <Eigen/Core>

#include <string>

namespace tvsbl {

double linear_tv(const Eigen::VectorXd& gamma);
double log_tv(const Eigen::VectorXd& gamma, double epsilon);

// Tangent-majorizer weights for the log penalty at gamma_prev:
// component i is 1/(|gamma_{i+1} - gamma_i| + epsilon), in (0, 1/epsilon].
Eigen::VectorXd log_tv_reweights(const Eigen::VectorXd& gamma_prev, double epsilon);

// Hyperprior on gamma: none, absolute first differences, or log-sum of first
// differences.
class TVRegularizer {
 public:
  enum class Kind { None, Linear, Log };

  static constexpr double kDefaultBeta = 1.0;
  static constexpr double kDefaultEpsilon = 1e-2;

  static TVRegularizer none() { return TVRegularizer(Kind::None, 0.0, kDefaultEpsilon); }
  static TVRegularizer linear(double beta = kDefaultBeta);
  static TVRegularizer log(double beta = kDefaultBeta, double epsilon = kDefaultEpsilon);

  Kind kind() const { return kind_; }
  double beta() const { return beta_; }
  double epsilon() const { return epsilon_; }

  // beta * T(gamma); zero for Kind::None.
  double penalty(const Eigen::VectorXd& gamma) const;

  std::string describe() const;

 private:
  TVRegularizer(Kind kind, double beta, double epsilon)
      : kind_(kind), beta_(beta), epsilon_(epsilon) {}

  Kind kind_;
  double beta_;
  double epsilon_;
};

}  // namespace tvsbl
