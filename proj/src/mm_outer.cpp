#include "tvsbl/mm_outer.hpp"

#include <algorithm>
#include <cmath>

#include "tvsbl/errors.hpp"

namespace tvsbl {

namespace {

void check_options(const SolverOptions& opts, Eigen::Index atoms) {
  require(opts.max_outer_iters >= 1, "max_outer_iters must be >= 1");
  require(opts.outer_tol >= 0.0, "outer_tol must be non-negative");
  require(opts.gamma_floor >= 0.0, "gamma_floor must be non-negative");
  if (opts.gamma_init) {
    require(opts.gamma_init->size() == atoms, "gamma_init length must match atom count");
    require_finite(*opts.gamma_init, "gamma_init");
    if ((opts.gamma_init->array() < 0.0).any())
      throw InputError("gamma_init has negative components");
  }
}

Eigen::VectorXd initial_gamma(const SolverOptions& opts, Eigen::Index atoms, double floor) {
  Eigen::VectorXd gamma =
      opts.gamma_init ? *opts.gamma_init : Eigen::VectorXd::Ones(atoms);
  return gamma.cwiseMax(floor);
}

// Values pinned at the solver floor are reported as exact zeros.
Eigen::VectorXd zero_floored(const Eigen::VectorXd& gamma, double floor) {
  Eigen::VectorXd out = gamma;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (out[i] <= floor * (1.0 + 1e-9)) out[i] = 0.0;
  return out;
}

}  // namespace

Eigen::VectorXd logdet_majorizer_weights(const Dictionary& dict, const Eigen::VectorXd& gamma_j,
                                         double lambda) {
  require(gamma_j.size() == dict.atoms(), "gamma length must match atom count");
  require(lambda > 0.0, "lambda must be positive");
  require_finite(gamma_j, "gamma");
  if ((gamma_j.array() < 0.0).any()) throw InputError("gamma has negative components");

  MeasurementFactor factor(dict.entries, gamma_j, lambda);
  const Eigen::MatrixXd solved = factor.solve(dict.entries);  // Sigma_y^{-1} A
  return (dict.entries.array() * solved.array()).colwise().sum();
}

double majorized_cost(const Dictionary& dict, const MeasurementSet& data,
                      const Eigen::VectorXd& gamma, const Eigen::VectorXd& w,
                      const Eigen::VectorXd& u, const TVRegularizer& reg) {
  const double beta = reg.kind() == TVRegularizer::Kind::None ? 0.0 : reg.beta();
  return subproblem_objective(dict.entries, data.y, data.noise_variance, w, u, beta, gamma);
}

SolveReport tv_sbl(const Dictionary& dict, const MeasurementSet& data, const TVRegularizer& reg,
                   const SolverOptions& opts) {
  require(dict.measurements() >= 1 && dict.atoms() >= 1, "dictionary must be non-empty");
  require(data.y.rows() == dict.measurements(),
          "measurement rows must match dictionary measurement count");
  require(data.snapshots() >= 1, "at least one snapshot required");
  require_finite(dict.entries, "dictionary");
  require_finite(data.y, "measurements");
  if (!(data.noise_variance > 0.0) || !std::isfinite(data.noise_variance))
    throw InputError("noise variance must be positive and finite");
  check_options(opts, dict.atoms());

  const Eigen::Index n = dict.atoms();
  const double lambda = data.noise_variance;
  const double floor = std::max(opts.gamma_floor, 1e-300);
  const double beta = reg.kind() == TVRegularizer::Kind::None ? 0.0 : reg.beta();

  Eigen::VectorXd gamma = initial_gamma(opts, n, floor);

  SolveReport report;
  report.cost_trace.push_back(sbl_cost(dict, data, {gamma}, reg));

  for (int j = 0; j < opts.max_outer_iters; ++j) {
    const Eigen::VectorXd w = logdet_majorizer_weights(dict, gamma, lambda);
    Eigen::VectorXd u;
    if (n > 1) {
      u = reg.kind() == TVRegularizer::Kind::Log
              ? log_tv_reweights(gamma, reg.epsilon())
              : Eigen::VectorXd::Ones(n - 1);
    } else {
      u = Eigen::VectorXd(0);
    }

    Eigen::VectorXd next;
    try {
      next = solve_subproblem(dict.entries, data.y, lambda, w, u, beta, gamma, floor, opts.inner)
                 .first;
    } catch (const ConvergenceError&) {
      InnerOptions retry = opts.inner;
      retry.max_mid_iters *= 4;
      retry.max_admm_iters *= 2;
      next = solve_subproblem(dict.entries, data.y, lambda, w, u, beta, gamma, floor, retry)
                 .first;
    }

    const double rel_change = (next - gamma).norm() / std::max(gamma.norm(), 1e-12);
    gamma = next;
    report.outer_iters_used = j + 1;
    report.cost_trace.push_back(sbl_cost(dict, data, {gamma}, reg));
    if (rel_change < opts.outer_tol) {
      report.converged = true;
      break;
    }
  }

  report.gamma_final = zero_floored(gamma, floor);
  report.posterior = posterior(dict, data, {report.gamma_final});
  return report;
}

}  // namespace tvsbl
