#pragma once

#include <Eigen/Core>

#include <utility>
#include <vector>

namespace tvsbl {

struct InnerOptions {
  int max_mid_iters = 50;    // data-fit rebound passes per subproblem
  double mid_tol = 1e-6;     // relative gamma-change stop for the mid loop
  double admm_rho = 1.0;     // initial penalty, adapted by residual balancing
  int max_admm_iters = 5000;
  double admm_tol_primal = 1e-8;
  double admm_tol_dual = 1e-8;
  double kkt_tol = 1e-5;     // optimality certificate at exit
};

struct SubproblemDiagnostics {
  std::vector<double> objective_trace;  // subproblem objective per mid iterate
  double kkt_residual = -1.0;
  int admm_iters_total = 0;
  bool converged = false;
  // Residuals and thresholds of the last ADMM solve (unset for closed forms).
  double admm_primal_residual = 0.0;
  double admm_dual_residual = 0.0;
  double admm_primal_threshold = 0.0;
  double admm_dual_threshold = 0.0;
};

// Tight variational upper bound on the data-fit term at gamma_tilde:
//   sum_l y_l^T Sigma_y(gamma)^{-1} y_l <= r + sum_i c_i / gamma_i
// for all gamma > 0, with equality at gamma = gamma_tilde, where
//   c_i = sum_l mu_{l,i}^2,  r = (1/lambda) sum_l ||y_l - A mu_l||^2
// and mu are the posterior means under gamma_tilde.
struct DatafitBound {
  Eigen::VectorXd c;
  double r = 0.0;
};

DatafitBound datafit_coefficients(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y,
                                  const Eigen::VectorXd& gamma_tilde, double lambda);

// Global minimizer of the separable-plus-weighted-TV convex problem
//   min_{gamma >= floor} sum_i (L*w_i*gamma_i + c_i/gamma_i)
//                        + beta * sum_i u_i |gamma_{i+1} - gamma_i|
// via ADMM on the first-difference splitting. With beta = 0 (or all u = 0)
// the exact closed form gamma_i = max(sqrt(c_i/(L*w_i)), floor) is returned.
Eigen::VectorXd separable_tv_min(const Eigen::VectorXd& w, const Eigen::VectorXd& c,
                                 const Eigen::VectorXd& u, double beta, int snapshots,
                                 double gamma_floor, const InnerOptions& opts = {},
                                 SubproblemDiagnostics* diagnostics = nullptr);

// Objective of the majorized subproblem,
//   F(gamma) = L * w . gamma + sum_l y_l^T Sigma_y(gamma)^{-1} y_l
//            + beta * sum_i u_i |gamma_{i+1} - gamma_i|.
double subproblem_objective(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, double lambda,
                            const Eigen::VectorXd& w, const Eigen::VectorXd& u, double beta,
                            const Eigen::VectorXd& gamma);

// Minimizes F by alternating datafit_coefficients at the current iterate with
// separable_tv_min on the resulting bound. F is convex and every bound is a
// tangent majorizer, so the iterates descend to the global minimum; the exit
// point is certified by kkt_residual. Throws ConvergenceError when the
// certificate is not met within the iteration budget.
std::pair<Eigen::VectorXd, SubproblemDiagnostics> solve_subproblem(
    const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, double lambda, const Eigen::VectorXd& w,
    const Eigen::VectorXd& u, double beta, const Eigen::VectorXd& gamma_init, double gamma_floor,
    const InnerOptions& opts = {});

// Norm of the minimal-norm subgradient of F at gamma, with coordinates
// pinned at gamma_floor contributing only their negative part (projected
// stationarity). Zero certifies global optimality of the convex subproblem.
double kkt_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, double lambda,
                    const Eigen::VectorXd& w, const Eigen::VectorXd& u, double beta,
                    const Eigen::VectorXd& gamma, double gamma_floor);

namespace detail {

// Exact minimizer over t in [-1, 1] of Q1(a1 - b*t) + Q2(a2 + b*t) where
// Qk(x) = x^2 for a free coordinate and min(x, 0)^2 for one at the bound.
double kkt_line_min(double a1, bool active1, double a2, bool active2, double b);

// Gradient scale used to normalize the exit certificate.
double kkt_gradient_scale(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, double lambda,
                          const Eigen::VectorXd& w, const Eigen::VectorXd& gamma);

}  // namespace detail

}  // namespace tvsbl
