#include "tvsbl/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "tvsbl/errors.hpp"

namespace tvsbl {

SolveReport msbl_em(const Dictionary& dict, const MeasurementSet& data,
                    const SolverOptions& opts) {
  require(dict.measurements() >= 1 && dict.atoms() >= 1, "dictionary must be non-empty");
  require(data.y.rows() == dict.measurements(),
          "measurement rows must match dictionary measurement count");
  require(data.snapshots() >= 1, "at least one snapshot required");
  require_finite(dict.entries, "dictionary");
  require_finite(data.y, "measurements");
  if (!(data.noise_variance > 0.0) || !std::isfinite(data.noise_variance))
    throw InputError("noise variance must be positive and finite");
  require(opts.max_outer_iters >= 1, "max_outer_iters must be >= 1");
  require(opts.outer_tol >= 0.0, "outer_tol must be non-negative");

  const Eigen::Index n = dict.atoms();
  const double lambda = data.noise_variance;
  const double snaps = static_cast<double>(data.snapshots());
  const double floor = std::max(opts.gamma_floor, 1e-300);
  const TVRegularizer none = TVRegularizer::none();

  Eigen::VectorXd gamma =
      opts.gamma_init ? Eigen::VectorXd(opts.gamma_init->cwiseMax(floor))
                      : Eigen::VectorXd(Eigen::VectorXd::Ones(n));
  require(gamma.size() == n, "gamma_init length must match atom count");

  SolveReport report;
  report.cost_trace.push_back(sbl_cost(dict, data, {gamma}, none));

  const Eigen::MatrixXd& a = dict.entries;
  for (int j = 0; j < opts.max_outer_iters; ++j) {
    MeasurementFactor factor(a, gamma, lambda);
    const Eigen::MatrixXd mu = detail::posterior_means(a, gamma, data.y, factor);
    // [Sigma_{x|y}]_ii = gamma_i - gamma_i^2 * a_i^T Sigma_y^{-1} a_i
    const Eigen::MatrixXd solved = factor.solve(a);
    const Eigen::VectorXd self_corr = (a.array() * solved.array()).colwise().sum();
    const Eigen::VectorXd cov_diag =
        gamma.array() * (1.0 - gamma.array() * self_corr.array());

    Eigen::VectorXd next =
        (mu.array().square().rowwise().sum() / snaps + cov_diag.array().max(0.0))
            .max(floor)
            .matrix();

    const double rel_change = (next - gamma).norm() / std::max(gamma.norm(), 1e-12);
    gamma = next;
    report.outer_iters_used = j + 1;
    report.cost_trace.push_back(sbl_cost(dict, data, {gamma}, none));
    if (rel_change < opts.outer_tol) {
      report.converged = true;
      break;
    }
  }

  Eigen::VectorXd final_gamma = gamma;
  for (Eigen::Index i = 0; i < n; ++i)
    if (final_gamma[i] <= floor * (1.0 + 1e-9)) final_gamma[i] = 0.0;

  report.gamma_final = final_gamma;
  report.posterior = posterior(dict, data, {final_gamma});
  return report;
}

}  // namespace tvsbl
