#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

#include "tvsbl/inner_solver.hpp"
#include "tvsbl/model.hpp"
#include "tvsbl/regularizers.hpp"

namespace tvsbl {

struct SolverOptions {
  int max_outer_iters = 30;
  double outer_tol = 1e-4;  // relative gamma-change stop
  std::optional<Eigen::VectorXd> gamma_init;  // default: all ones
  double gamma_floor = 1e-10;
  InnerOptions inner;
};

struct SolveReport {
  Eigen::VectorXd gamma_final;  // exact zeros where the solver pinned the floor
  Posterior posterior;
  std::vector<double> cost_trace;  // generalized SBL cost per outer iterate
  int outer_iters_used = 0;
  bool converged = false;
};

// Linearization weights of logdet(Sigma_y) at gamma_j:
// w_i = a_i^T Sigma_y(gamma_j)^{-1} a_i, all strictly positive.
Eigen::VectorXd logdet_majorizer_weights(const Dictionary& dict, const Eigen::VectorXd& gamma_j,
                                         double lambda);

// L * w . gamma + sum_l y_l^T Sigma_y(gamma)^{-1} y_l + beta * sum_i u_i |d_i|
// with d the first differences of gamma (u is all-ones for the linear
// penalty; beta = 0 when reg is None).
double majorized_cost(const Dictionary& dict, const MeasurementSet& data,
                      const Eigen::VectorXd& gamma, const Eigen::VectorXd& w,
                      const Eigen::VectorXd& u, const TVRegularizer& reg);

// Outer majorization-minimization loop: linearize logdet(Sigma_y) at the
// current iterate, reweight the log penalty when applicable, hand the convex
// subproblem to solve_subproblem, and stop on relative gamma change or the
// iteration cap. The posterior of the final gamma is returned with the
// report.
SolveReport tv_sbl(const Dictionary& dict, const MeasurementSet& data, const TVRegularizer& reg,
                   const SolverOptions& opts = {});

}  // namespace tvsbl
