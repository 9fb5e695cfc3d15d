#include "tvsbl/inner_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tvsbl/errors.hpp"
#include "tvsbl/model.hpp"

// Solves the convex subproblem
//
//   min_{gamma >= floor}  F(gamma) = L * w . gamma
//                                  + sum_l y_l^T Sigma_y(gamma)^{-1} y_l
//                                  + beta * sum_i u_i |gamma_{i+1} - gamma_i|
//
// by a mid-level majorization of the data-fit term. At the current iterate
// the variational identity
//
//   y^T Sigma_y(gamma)^{-1} y = min_x (1/lambda)||y - A x||^2 + x^T Gamma^{-1} x,
//
// minimized by the posterior mean, yields the tangent upper bound
// r + sum_i c_i/gamma_i. Each mid pass therefore reduces to a separable-plus-
// weighted-TV problem, handled by ADMM on the splitting z = D gamma:
// soft-thresholding for the difference block and a projected Newton step with
// a tridiagonal-plus-diagonal Hessian for the smooth block. Convexity of F
// and tangency of every bound drive the mid loop to the global minimum,
// certified at exit by the KKT residual.

namespace tvsbl {

namespace {

Eigen::VectorXd forward_diff(const Eigen::VectorXd& g) {
  const Eigen::Index n = g.size();
  if (n <= 1) return Eigen::VectorXd(0);
  return g.tail(n - 1) - g.head(n - 1);
}

// D^T z for the (n-1) x n first-difference matrix D.
Eigen::VectorXd diff_transpose(const Eigen::VectorXd& z, Eigen::Index n) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (n <= 1) return out;
  out.head(n - 1) -= z;
  out.tail(n - 1) += z;
  return out;
}

double separable_objective(const Eigen::VectorXd& w, const Eigen::VectorXd& c,
                           const Eigen::VectorXd& u, double beta, double snapshots,
                           const Eigen::VectorXd& g) {
  double value = snapshots * w.dot(g) + (c.array() / g.array()).sum();
  if (beta > 0.0 && g.size() > 1)
    value += beta * (u.array() * forward_diff(g).cwiseAbs().array()).sum();
  return value;
}

// Symmetric tridiagonal LDL^T solve on indices [s, e) with diagonal diag[]
// and constant off-diagonal `off`; rhs is overwritten with the solution.
void solve_tridiag_run(Eigen::VectorXd& diag, double off, Eigen::VectorXd& rhs, Eigen::Index s,
                       Eigen::Index e) {
  for (Eigen::Index k = s + 1; k < e; ++k) {
    const double l = off / diag[k - 1];
    diag[k] -= l * off;
    rhs[k] -= l * rhs[k - 1];
  }
  rhs[e - 1] /= diag[e - 1];
  for (Eigen::Index k = e - 2; k >= s; --k) rhs[k] = rhs[k] / diag[k] - (off / diag[k]) * rhs[k + 1];
}

// Minimizes  sum_i (L*w_i*g_i + c_i/g_i) + (rho/2)||D g - zhat||^2  over
// g >= floor. Projected Newton: the reduced Hessian on each contiguous run of
// free coordinates stays tridiagonal, solved by LDL^T; Armijo backtracking
// along the projected path.
void gamma_update(const Eigen::VectorXd& w, const Eigen::VectorXd& c, double snapshots,
                  double rho, const Eigen::VectorXd& zhat, double floor, Eigen::VectorXd& g) {
  const Eigen::Index n = g.size();
  const double newton_tol = 1e-11 * (1.0 + snapshots * w.maxCoeff() + rho);
  const double tikhonov = 1e-12 * (1.0 + rho);

  auto objective = [&](const Eigen::VectorXd& x) {
    double value = snapshots * w.dot(x) + (c.array() / x.array()).sum();
    if (n > 1) value += 0.5 * rho * (forward_diff(x) - zhat).squaredNorm();
    return value;
  };

  Eigen::VectorXd grad(n), dir(n), diag(n), cand(n);
  std::vector<char> is_free(static_cast<std::size_t>(n));

  for (int iter = 0; iter < 60; ++iter) {
    grad = snapshots * w - (c.array() / g.array().square()).matrix();
    if (n > 1) grad += rho * diff_transpose(forward_diff(g) - zhat, n);

    double pg_norm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool clamped = g[i] <= floor && grad[i] > 0.0;
      is_free[static_cast<std::size_t>(i)] = !clamped;
      if (!clamped) pg_norm = std::max(pg_norm, std::abs(grad[i]));
    }
    if (pg_norm <= newton_tol) return;

    dir.setZero();
    Eigen::Index i = 0;
    while (i < n) {
      if (!is_free[static_cast<std::size_t>(i)]) {
        ++i;
        continue;
      }
      Eigen::Index j = i;
      while (j < n && is_free[static_cast<std::size_t>(j)]) ++j;
      for (Eigen::Index k = i; k < j; ++k) {
        const double degree = (n == 1) ? 0.0 : ((k == 0 || k == n - 1) ? 1.0 : 2.0);
        diag[k] = 2.0 * c[k] / (g[k] * g[k] * g[k]) + rho * degree + tikhonov;
        dir[k] = -grad[k];
      }
      solve_tridiag_run(diag, -rho, dir, i, j);
      i = j;
    }

    double descent = grad.dot(dir);
    if (!(descent < 0.0)) {
      for (Eigen::Index k = 0; k < n; ++k)
        dir[k] = is_free[static_cast<std::size_t>(k)] ? -grad[k] : 0.0;
      descent = grad.dot(dir);
      if (!(descent < 0.0)) return;
    }

    const double f0 = objective(g);
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      cand = (g + step * dir).cwiseMax(floor);
      const double predicted = grad.dot(cand - g);
      if (predicted >= 0.0) {
        if ((cand - g).lpNorm<Eigen::Infinity>() == 0.0) break;
        step *= 0.5;
        continue;
      }
      if (objective(cand) <= f0 + 1e-4 * predicted) {
        g = cand;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) return;
  }
}

struct AdmmState {
  Eigen::VectorXd z;
  Eigen::VectorXd v;  // scaled dual
  double rho = 1.0;
  bool initialized = false;
};

struct AdmmResult {
  int iters = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double primal_threshold = 0.0;
  double dual_threshold = 0.0;
  bool converged = false;
};

// ADMM for min f(gamma) + g(z), z = D gamma, with f the separable smooth
// block plus the box indicator and g(z) = beta * sum_i u_i |z_i|.
AdmmResult admm_separable_tv(const Eigen::VectorXd& w, const Eigen::VectorXd& c,
                             const Eigen::VectorXd& u, double beta, double snapshots,
                             double floor, const InnerOptions& opts, AdmmState& state,
                             Eigen::VectorXd& gamma) {
  const Eigen::Index n = gamma.size();
  const Eigen::Index nd = n - 1;
  if (!state.initialized) {
    state.z = forward_diff(gamma);
    state.v = Eigen::VectorXd::Zero(nd);
    state.rho = opts.admm_rho;
    state.initialized = true;
  }

  AdmmResult result;
  const double relax = 1.7;  // over-relaxation
  Eigen::VectorXd z_old(nd), dg(nd), zhat(nd), relaxed(nd);
  for (int k = 0; k < opts.max_admm_iters; ++k) {
    ++result.iters;
    zhat = state.z - state.v;
    gamma_update(w, c, snapshots, state.rho, zhat, floor, gamma);

    dg = forward_diff(gamma);
    z_old = state.z;
    relaxed = relax * dg + (1.0 - relax) * z_old;
    const Eigen::ArrayXd threshold = (beta / state.rho) * u.array();
    state.z = ((relaxed + state.v).array().abs() - threshold).max(0.0) *
              (relaxed + state.v).array().sign();
    state.v += relaxed - state.z;

    result.primal_residual = (dg - state.z).norm();
    result.dual_residual = state.rho * diff_transpose(state.z - z_old, n).norm();
    result.primal_threshold =
        opts.admm_tol_primal *
        (std::sqrt(static_cast<double>(nd)) + std::max(dg.norm(), state.z.norm()));
    result.dual_threshold =
        opts.admm_tol_dual * (std::sqrt(static_cast<double>(n)) +
                              state.rho * diff_transpose(state.v, n).norm());
    if (result.primal_residual <= result.primal_threshold &&
        result.dual_residual <= result.dual_threshold) {
      result.converged = true;
      break;
    }

    if (result.primal_residual > 10.0 * result.dual_residual && state.rho < 1e8) {
      state.rho *= 2.0;
      state.v *= 0.5;
    } else if (result.dual_residual > 10.0 * result.primal_residual && state.rho > 1e-8) {
      state.rho *= 0.5;
      state.v *= 2.0;
    }
  }
  return result;
}

Eigen::VectorXd closed_form_no_tv(const Eigen::VectorXd& w, const Eigen::VectorXd& c,
                                  double snapshots, double floor) {
  return (c.array() / (snapshots * w.array())).sqrt().max(floor).matrix();
}

void check_separable_inputs(const Eigen::VectorXd& w, const Eigen::VectorXd& c,
                            const Eigen::VectorXd& u, double beta, int snapshots,
                            double gamma_floor) {
  require(w.size() >= 1, "w must be non-empty");
  require(c.size() == w.size(), "c and w must have equal length");
  require(u.size() == std::max<Eigen::Index>(w.size() - 1, 0),
          "u must have one entry per first difference");
  require(snapshots >= 1, "snapshot count must be at least 1");
  require(beta >= 0.0, "beta must be non-negative");
  require(gamma_floor >= 0.0, "gamma_floor must be non-negative");
  require_finite(w, "w");
  require_finite(c, "c");
  if (u.size() > 0) require_finite(u, "u");
  if ((w.array() <= 0.0).any()) throw InputError("w must be strictly positive");
  if ((c.array() < 0.0).any()) throw InputError("c must be non-negative");
  if (u.size() > 0 && (u.array() < 0.0).any()) throw InputError("u must be non-negative");
}

}  // namespace

namespace {

DatafitBound datafit_from_factor(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y,
                                 const Eigen::VectorXd& gamma_tilde, double lambda,
                                 const MeasurementFactor& factor) {
  const Eigen::MatrixXd mu = detail::posterior_means(a, gamma_tilde, y, factor);
  DatafitBound bound;
  bound.c = mu.array().square().rowwise().sum();
  bound.r = (y - a * mu).squaredNorm() / lambda;
  return bound;
}

double objective_from_factor(const MeasurementFactor& factor, const Eigen::MatrixXd& y,
                             const Eigen::VectorXd& w, const Eigen::VectorXd& u, double beta,
                             const Eigen::VectorXd& gamma) {
  double value = static_cast<double>(y.cols()) * w.dot(gamma) + factor.quadratic_sum(y);
  if (beta > 0.0 && gamma.size() > 1)
    value += beta * (u.array() * forward_diff(gamma).cwiseAbs().array()).sum();
  return value;
}

// Exact minimization of F along one coordinate, holding the rest of gamma
// fixed. With S = Sigma_y at gamma_i = 0 the rank-1 identity
//   y^T (S + t a_i a_i^T)^{-1} y = y^T S^{-1} y - t (a_i^T S^{-1} y)^2 / (1 + t q),
//   q = a_i^T S^{-1} a_i,
// makes the smooth part closed-form in t, and the TV term is piecewise
// linear with kinks at the neighbor values, so the global coordinate
// minimizer is the best of a handful of per-region stationary points and
// breakpoints. Returns the minimizing value of gamma_i.
double exact_coordinate_min(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, double lambda,
                            const Eigen::VectorXd& w, const Eigen::VectorXd& u, double beta,
                            const Eigen::VectorXd& gamma, Eigen::Index i, double gamma_floor) {
  const Eigen::Index n = gamma.size();
  const double snaps = static_cast<double>(y.cols());

  Eigen::VectorXd base = gamma;
  base[i] = 0.0;
  MeasurementFactor f0(a, base, lambda);
  const Eigen::VectorXd solved_col = f0.solve(a.col(i));
  const double q = a.col(i).dot(solved_col);
  const Eigen::RowVectorXd r = a.col(i).transpose() * f0.solve(y);  // 1 x L
  const double p = r.squaredNorm();
  const double linear = snaps * w[i];

  const double left = (i > 0 && beta > 0.0 && u[i - 1] > 0.0) ? gamma[i - 1] : -1.0;
  const double right = (i + 1 < n && beta > 0.0 && u[i] > 0.0) ? gamma[i + 1] : -1.0;

  auto phi = [&](double t) {
    double value = linear * t - t * p / (1.0 + t * q);
    if (left >= 0.0) value += beta * u[i - 1] * std::abs(t - left);
    if (right >= 0.0) value += beta * u[i] * std::abs(right - t);
    return value;
  };

  std::vector<double> candidates = {gamma_floor};
  if (left >= gamma_floor) candidates.push_back(left);
  if (right >= gamma_floor) candidates.push_back(right);

  // Per-region stationary points of linear + sigma - p/(1+tq)^2 = 0.
  std::vector<double> edges = {gamma_floor};
  if (left > gamma_floor) edges.push_back(left);
  if (right > gamma_floor) edges.push_back(right);
  std::sort(edges.begin(), edges.end());
  edges.push_back(std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double lo = edges[k];
    const double hi = edges[k + 1];
    if (!(hi > lo)) continue;
    const double mid = std::isinf(hi) ? lo + 1.0 : 0.5 * (lo + hi);
    double sigma = 0.0;
    if (left >= 0.0) sigma += beta * u[i - 1] * (mid > left ? 1.0 : -1.0);
    if (right >= 0.0) sigma -= beta * u[i] * (right > mid ? 1.0 : -1.0);
    const double slope = linear + sigma;
    if (slope > 0.0 && p > 0.0 && q > 0.0) {
      const double t_star = (std::sqrt(p / slope) - 1.0) / q;
      candidates.push_back(std::clamp(t_star, lo, std::isinf(hi) ? t_star : hi));
    }
  }

  double best_t = gamma_floor;
  double best_value = phi(gamma_floor);
  for (double t : candidates) {
    const double tc = std::max(t, gamma_floor);
    const double value = phi(tc);
    if (value < best_value) {
      best_value = value;
      best_t = tc;
    }
  }
  return best_t;
}

// Second-order polish on the active-set reduced problem. Fused runs (zero
// differences under penalized edges) collapse to one level variable each,
// the nonzero differences contribute fixed-sign linear terms, and the smooth
// block has the exact derivatives
//   dF/dgamma_i  = L w_i - sum_l (a_i^T S^{-1} y_l)^2
//   d2F/dgdg_ij  = 2 (a_i^T S^{-1} a_j) sum_l (a_i^T S^{-1} y_l)(a_j^T S^{-1} y_l)
// so a projected Newton step on the group levels resolves the flat valleys
// that first-order MM crosses only geometrically. Every step is Armijo-
// checked against the true objective; fused groups are never split here
// (the ADMM step does that).
bool newton_polish(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, double lambda,
                   const Eigen::VectorXd& w, const Eigen::VectorXd& u, double beta,
                   double gamma_floor, Eigen::VectorXd& gamma, MeasurementFactor& factor,
                   double& objective) {
  const Eigen::Index n = gamma.size();
  const double snaps = static_cast<double>(y.cols());
  const double tie = 1e-7 * std::max(1.0, gamma.cwiseAbs().maxCoeff());

  std::vector<int> group_of(static_cast<std::size_t>(n));
  int groups = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i > 0 && beta > 0.0 && u[i - 1] > 0.0 && std::abs(gamma[i] - gamma[i - 1]) <= tie)
      group_of[static_cast<std::size_t>(i)] = group_of[static_cast<std::size_t>(i - 1)];
    else
      group_of[static_cast<std::size_t>(i)] = groups++;
  }

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(groups);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(groups);
  for (Eigen::Index i = 0; i < n; ++i) {
    theta[group_of[static_cast<std::size_t>(i)]] += gamma[i];
    counts[group_of[static_cast<std::size_t>(i)]] += 1.0;
  }
  theta = (theta.array() / counts.array()).max(gamma_floor).matrix();

  auto expand = [&](const Eigen::VectorXd& levels) {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = levels[group_of[static_cast<std::size_t>(i)]];
    return out;
  };

  const double initial_objective = objective;
  Eigen::VectorXd current = expand(theta);
  MeasurementFactor current_factor(a, current, lambda);
  double current_objective = objective_from_factor(current_factor, y, w, u, beta, current);
  if (current_objective > objective + 1e-12 * (1.0 + std::abs(objective))) return false;

  for (int iter = 0; iter < 30; ++iter) {
    const Eigen::MatrixXd corr = a.transpose() * current_factor.solve(y);  // N x L
    const Eigen::MatrixXd b = a.transpose() * current_factor.solve(a);     // N x N
    const Eigen::VectorXd grad_coord =
        snaps * w - corr.array().square().rowwise().sum().matrix();
    const Eigen::MatrixXd hess_coord =
        2.0 * (b.array() * (corr * corr.transpose()).array()).matrix();

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(groups);
    for (Eigen::Index i = 0; i < n; ++i)
      grad[group_of[static_cast<std::size_t>(i)]] += grad_coord[i];
    if (beta > 0.0) {
      for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const int left = group_of[static_cast<std::size_t>(i)];
        const int right = group_of[static_cast<std::size_t>(i + 1)];
        if (left == right || u[i] <= 0.0) continue;
        const double sign = current[i + 1] > current[i] ? 1.0 : -1.0;
        grad[right] += beta * u[i] * sign;
        grad[left] -= beta * u[i] * sign;
      }
    }

    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(groups, groups);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        hess(group_of[static_cast<std::size_t>(i)], group_of[static_cast<std::size_t>(j)]) +=
            hess_coord(i, j);
    hess.diagonal().array() += 1e-9 * (1.0 + hess.trace() / groups);

    double pg_norm = 0.0;
    std::vector<char> is_free(static_cast<std::size_t>(groups));
    for (int g = 0; g < groups; ++g) {
      const bool clamped = theta[g] <= gamma_floor && grad[g] > 0.0;
      is_free[static_cast<std::size_t>(g)] = !clamped;
      if (!clamped) pg_norm = std::max(pg_norm, std::abs(grad[g]));
    }
    if (pg_norm <= 1e-10 * (1.0 + grad.cwiseAbs().maxCoeff())) break;

    std::vector<int> free_idx;
    for (int g = 0; g < groups; ++g)
      if (is_free[static_cast<std::size_t>(g)]) free_idx.push_back(g);
    if (free_idx.empty()) break;

    Eigen::MatrixXd h_ff(free_idx.size(), free_idx.size());
    Eigen::VectorXd g_f(free_idx.size());
    for (std::size_t r = 0; r < free_idx.size(); ++r) {
      g_f[static_cast<Eigen::Index>(r)] = grad[free_idx[r]];
      for (std::size_t c = 0; c < free_idx.size(); ++c)
        h_ff(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            hess(free_idx[r], free_idx[c]);
    }
    Eigen::VectorXd d_f = h_ff.ldlt().solve(-g_f);
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(groups);
    for (std::size_t r = 0; r < free_idx.size(); ++r)
      dir[free_idx[r]] = d_f[static_cast<Eigen::Index>(r)];
    if (!(grad.dot(dir) < 0.0)) {
      dir.setZero();
      for (int g : free_idx) dir[g] = -grad[g];
    }

    bool moved = false;
    double step = 1.0;
    for (int ls = 0; ls < 40; ++ls) {
      const Eigen::VectorXd trial_theta = (theta + step * dir).cwiseMax(gamma_floor);
      const double predicted = grad.dot(trial_theta - theta);
      if (predicted >= 0.0) {
        if ((trial_theta - theta).lpNorm<Eigen::Infinity>() == 0.0) break;
        step *= 0.5;
        continue;
      }
      const Eigen::VectorXd trial = expand(trial_theta);
      MeasurementFactor trial_factor(a, trial, lambda);
      const double trial_objective = objective_from_factor(trial_factor, y, w, u, beta, trial);
      if (trial_objective <= current_objective + 1e-4 * predicted) {
        theta = trial_theta;
        current = trial;
        current_factor = trial_factor;
        current_objective = trial_objective;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }

  if (current_objective <= initial_objective) {
    gamma = current;
    factor = current_factor;
    objective = current_objective;
    return true;
  }
  return false;
}

}  // namespace

DatafitBound datafit_coefficients(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y,
                                  const Eigen::VectorXd& gamma_tilde, double lambda) {
  require(a.rows() == y.rows(), "dictionary and measurements row counts differ");
  require(gamma_tilde.size() == a.cols(), "gamma length must match atom count");
  require(lambda > 0.0, "lambda must be positive");
  require_finite(gamma_tilde, "gamma");

  MeasurementFactor factor(a, gamma_tilde, lambda);
  return datafit_from_factor(a, y, gamma_tilde, lambda, factor);
}

Eigen::VectorXd separable_tv_min(const Eigen::VectorXd& w, const Eigen::VectorXd& c,
                                 const Eigen::VectorXd& u, double beta, int snapshots,
                                 double gamma_floor, const InnerOptions& opts,
                                 SubproblemDiagnostics* diagnostics) {
  check_separable_inputs(w, c, u, beta, snapshots, gamma_floor);
  const double snaps = static_cast<double>(snapshots);
  const double floor = std::max(gamma_floor, 1e-300);

  Eigen::VectorXd gamma = closed_form_no_tv(w, c, snaps, floor);
  const bool tv_active = beta > 0.0 && u.size() > 0 && u.maxCoeff() > 0.0 && c.maxCoeff() > 0.0;
  if (!tv_active) {
    if (diagnostics) {
      diagnostics->objective_trace = {separable_objective(w, c, u, beta, snaps, gamma)};
      diagnostics->converged = true;
      diagnostics->admm_iters_total = 0;
    }
    return gamma;
  }

  const double start_objective = separable_objective(w, c, u, beta, snaps, gamma);
  Eigen::VectorXd start = gamma;
  AdmmState state;
  AdmmResult result = admm_separable_tv(w, c, u, beta, snaps, floor, opts, state, gamma);
  double objective = separable_objective(w, c, u, beta, snaps, gamma);
  if (objective > start_objective) {
    gamma = start;
    objective = start_objective;
  }

  if (diagnostics) {
    diagnostics->objective_trace = {start_objective, objective};
    diagnostics->admm_iters_total = result.iters;
    diagnostics->converged = result.converged;
    diagnostics->admm_primal_residual = result.primal_residual;
    diagnostics->admm_dual_residual = result.dual_residual;
    diagnostics->admm_primal_threshold = result.primal_threshold;
    diagnostics->admm_dual_threshold = result.dual_threshold;
  }
  if (!result.converged)
    throw ConvergenceError("ADMM did not meet its residual tolerances within max_admm_iters",
                           std::max(result.primal_residual, result.dual_residual), result.iters);
  return gamma;
}

double subproblem_objective(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, double lambda,
                            const Eigen::VectorXd& w, const Eigen::VectorXd& u, double beta,
                            const Eigen::VectorXd& gamma) {
  MeasurementFactor factor(a, gamma, lambda);
  double value = static_cast<double>(y.cols()) * w.dot(gamma) + factor.quadratic_sum(y);
  if (beta > 0.0 && gamma.size() > 1)
    value += beta * (u.array() * forward_diff(gamma).cwiseAbs().array()).sum();
  return value;
}

namespace {

// One full mid loop. Plain MM on the variational bound contracts only
// geometrically (the c/gamma barrier never reaches the boundary and flat
// valleys of F give rates near 1), so each cycle takes two MM steps and
// attempts a SQUAREM extrapolation, accepted only when the true objective
// decreases. allow_snap additionally batch-pins tiny coordinates whose exact
// gradient pushes them down, again objective-guarded; snap_used reports
// whether that accelerator fired. max_mid_iters counts MM rebounds of the
// data-fit term.
std::pair<Eigen::VectorXd, SubproblemDiagnostics> run_mid_loop(
    const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, double lambda, const Eigen::VectorXd& w,
    const Eigen::VectorXd& u, double beta, const Eigen::VectorXd& gamma_init, double gamma_floor,
    const InnerOptions& opts, bool allow_snap, bool& snap_used) {
  const double snaps = static_cast<double>(y.cols());
  const Eigen::Index n = a.cols();
  Eigen::VectorXd gamma = gamma_init.cwiseMax(gamma_floor);
  snap_used = false;

  SubproblemDiagnostics diag;
  MeasurementFactor factor(a, gamma, lambda);
  double objective = objective_from_factor(factor, y, w, u, beta, gamma);
  diag.objective_trace.push_back(objective);
  const double descent_slack = 1e-9 * (1.0 + std::abs(objective));

  AdmmState state;
  const bool tv_active = beta > 0.0 && n > 1 && u.size() > 0 && u.maxCoeff() > 0.0;

  // A marginal ADMM tolerance miss is not fatal here: the descent guard
  // rejects bad steps and the exit certificate gates success.
  auto mm_step = [&](const Eigen::VectorXd& point,
                     const MeasurementFactor& point_factor) -> Eigen::VectorXd {
    const DatafitBound bound = datafit_from_factor(a, y, point, lambda, point_factor);
    if (!tv_active || bound.c.maxCoeff() <= 0.0)
      return closed_form_no_tv(w, bound.c, snaps, gamma_floor);
    Eigen::VectorXd candidate = point;
    const AdmmResult result =
        admm_separable_tv(w, bound.c, u, beta, snaps, gamma_floor, opts, state, candidate);
    diag.admm_iters_total += result.iters;
    diag.admm_primal_residual = result.primal_residual;
    diag.admm_dual_residual = result.dual_residual;
    diag.admm_primal_threshold = result.primal_threshold;
    diag.admm_dual_threshold = result.dual_threshold;
    return candidate;
  };

  int budget = opts.max_mid_iters;
  int cycle = 0;
  while (budget > 0) {
    ++cycle;
    const Eigen::VectorXd cycle_start = gamma;

    const Eigen::VectorXd g1 = mm_step(gamma, factor);
    --budget;
    MeasurementFactor factor1(a, g1, lambda);
    const double obj1 = objective_from_factor(factor1, y, w, u, beta, g1);
    // Near the solution the surrogate improvement drops below the ADMM
    // precision and the step may tick the objective up; keep the current
    // iterate then, but still let the exact-gradient passes below refine it.
    const bool mm_rejected = obj1 > objective + descent_slack;

    Eigen::VectorXd accepted = mm_rejected ? gamma : g1;
    MeasurementFactor accepted_factor = mm_rejected ? factor : factor1;
    double accepted_obj = mm_rejected ? objective : obj1;

    if (!mm_rejected && budget > 0) {
      const Eigen::VectorXd g2 = mm_step(g1, factor1);
      --budget;
      MeasurementFactor factor2(a, g2, lambda);
      const double obj2 = objective_from_factor(factor2, y, w, u, beta, g2);
      if (obj2 <= obj1 + descent_slack) {
        accepted = g2;
        accepted_factor = factor2;
        accepted_obj = obj2;

        const Eigen::VectorXd r = g1 - gamma;
        const Eigen::VectorXd v = (g2 - g1) - r;
        const double v_norm = v.norm();
        if (v_norm > 0.0) {
          const double alpha = -std::max(1.0, r.norm() / v_norm);
          const Eigen::VectorXd cand =
              (gamma - 2.0 * alpha * r + (alpha * alpha) * v).cwiseMax(gamma_floor);
          MeasurementFactor cand_factor(a, cand, lambda);
          const double cand_obj = objective_from_factor(cand_factor, y, w, u, beta, cand);
          if (cand_obj < accepted_obj) {
            accepted = cand;
            accepted_factor = cand_factor;
            accepted_obj = cand_obj;
          }
        }
      }
    }

    const double rel_mm =
        (accepted - gamma).norm() / std::max(gamma.norm(), 1e-12);
    gamma = accepted;
    objective = accepted_obj;
    factor = accepted_factor;
    const Eigen::VectorXd after_mm = gamma;

    Eigen::VectorXd smooth =
        snaps * w -
        (a.transpose() * factor.solve(y)).array().square().rowwise().sum().matrix();

    // Boundary escape: a coordinate whose exact gradient stays negative even
    // with the largest possible TV assist must rise at the optimum, but the
    // 1/gamma barrier of the bound only grows it multiplicatively. Exact
    // coordinate descent jumps it there directly.
    for (Eigen::Index i = 0; i < n; ++i) {
      const double tv_help =
          beta * ((i > 0 ? u[i - 1] : 0.0) + (i + 1 < n ? u[i] : 0.0));
      if (smooth[i] + tv_help >= -1e-9 * (1.0 + smooth.cwiseAbs().maxCoeff())) continue;
      const double lifted = exact_coordinate_min(a, y, lambda, w, u, beta, gamma, i, gamma_floor);
      if (std::abs(lifted - gamma[i]) <= 1e-12 * (1.0 + gamma[i])) continue;
      Eigen::VectorXd trial = gamma;
      trial[i] = lifted;
      MeasurementFactor trial_factor(a, trial, lambda);
      const double trial_objective = objective_from_factor(trial_factor, y, w, u, beta, trial);
      if (trial_objective <= objective + 1e-12 * (1.0 + std::abs(objective))) {
        gamma = trial;
        objective = std::min(objective, trial_objective);
        factor = trial_factor;
        smooth = snaps * w -
                 (a.transpose() * factor.solve(y)).array().square().rowwise().sum().matrix();
      }
    }

    if (allow_snap) {
      // Marginal boundary coordinates decay too slowly to reach a tight
      // eligibility level before the budget runs out; widen it once the MM
      // step stalls. The descent check still rejects pinning
      // interior-optimal coordinates.
      const bool stalled = cycle >= 3 && rel_mm < 1e-2;
      const double snap_level = (stalled ? 0.35 : 0.05) * gamma.maxCoeff();
      Eigen::VectorXd trial = gamma;
      bool any = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (gamma[i] > gamma_floor && gamma[i] <= snap_level && smooth[i] > 0.0) {
          trial[i] = gamma_floor;
          any = true;
        }
      }
      if (any) {
        MeasurementFactor trial_factor(a, trial, lambda);
        const double trial_objective = objective_from_factor(trial_factor, y, w, u, beta, trial);
        if (trial_objective <= objective + 1e-12 * (1.0 + std::abs(objective))) {
          gamma = trial;
          objective = std::min(objective, trial_objective);
          factor = trial_factor;
          snap_used = true;
        }
      }
    }

    newton_polish(a, y, lambda, w, u, beta, gamma_floor, gamma, factor, objective);
    if (tv_active && state.initialized &&
        (gamma - after_mm).lpNorm<Eigen::Infinity>() > 0.0)
      state.z = forward_diff(gamma);

    diag.objective_trace.push_back(objective);
    const double rel_change =
        (gamma - cycle_start).norm() / std::max(cycle_start.norm(), 1e-12);

    if (rel_change < opts.mid_tol || mm_rejected) {
      diag.kkt_residual = kkt_residual(a, y, lambda, w, u, beta, gamma, gamma_floor);
      const double scale = detail::kkt_gradient_scale(a, y, lambda, w, gamma);
      if (diag.kkt_residual <= opts.kkt_tol * scale) break;
      if (rel_change == 0.0) break;  // fixed point of every step, no progress
    }
  }

  diag.kkt_residual = kkt_residual(a, y, lambda, w, u, beta, gamma, gamma_floor);
  const double scale = detail::kkt_gradient_scale(a, y, lambda, w, gamma);
  diag.converged = diag.kkt_residual <= opts.kkt_tol * scale;
  return {gamma, diag};
}

}  // namespace

std::pair<Eigen::VectorXd, SubproblemDiagnostics> solve_subproblem(
    const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, double lambda, const Eigen::VectorXd& w,
    const Eigen::VectorXd& u, double beta, const Eigen::VectorXd& gamma_init, double gamma_floor,
    const InnerOptions& opts) {
  require(a.rows() == y.rows(), "dictionary and measurements row counts differ");
  require(w.size() == a.cols() && gamma_init.size() == a.cols(),
          "w and gamma_init must match atom count");
  require(u.size() == std::max<Eigen::Index>(a.cols() - 1, 0),
          "u must have one entry per first difference");
  require(opts.max_mid_iters >= 1 && opts.max_admm_iters >= 1, "iteration caps must be >= 1");
  require(opts.mid_tol > 0.0 && opts.admm_tol_primal > 0.0 && opts.admm_tol_dual > 0.0 &&
              opts.kkt_tol > 0.0 && opts.admm_rho > 0.0,
          "inner tolerances must be positive");
  require(lambda > 0.0, "lambda must be positive");
  require(gamma_floor > 0.0, "gamma_floor must be positive inside the solver");

  bool snap_used = false;
  auto result = run_mid_loop(a, y, lambda, w, u, beta, gamma_init, gamma_floor, opts, true,
                             snap_used);
  if (!result.second.converged && snap_used) {
    bool unused = false;
    auto careful = run_mid_loop(a, y, lambda, w, u, beta, gamma_init, gamma_floor, opts, false,
                                unused);
    if (careful.second.converged ||
        careful.second.kkt_residual < result.second.kkt_residual)
      result = std::move(careful);
  }
  if (!result.second.converged)
    throw ConvergenceError("subproblem KKT residual above tolerance at exit",
                           result.second.kkt_residual, result.second.admm_iters_total);
  return result;
}

double kkt_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, double lambda,
                    const Eigen::VectorXd& w, const Eigen::VectorXd& u, double beta,
                    const Eigen::VectorXd& gamma, double gamma_floor) {
  const Eigen::Index n = gamma.size();
  const double snaps = static_cast<double>(y.cols());

  MeasurementFactor factor(a, gamma, lambda);
  const Eigen::MatrixXd corr = a.transpose() * factor.solve(y);  // N x L
  Eigen::VectorXd smooth = snaps * w - corr.array().square().rowwise().sum().matrix();

  std::vector<char> active(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    active[static_cast<std::size_t>(i)] = gamma[i] <= gamma_floor * (1.0 + 1e-9);

  auto coordinate_penalty = [&](Eigen::Index j, double field) {
    if (active[static_cast<std::size_t>(j)]) return std::min(field, 0.0);
    return field;
  };

  if (beta <= 0.0 || n == 1 || u.size() == 0) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double r = coordinate_penalty(j, smooth[j]);
      sum += r * r;
    }
    return std::sqrt(sum);
  }

  // Subgradient sign variables per difference: fixed where the difference is
  // decisively nonzero, otherwise free in [-1, 1] and optimized below by
  // exact coordinate descent (the residual is a smooth convex function of
  // the free signs).
  const Eigen::VectorXd diffs = forward_diff(gamma);
  const double tie_tol = 1e-7 * std::max(1.0, gamma.cwiseAbs().maxCoeff());
  Eigen::VectorXd t(n - 1);
  std::vector<char> fixed(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (std::abs(diffs[i]) > tie_tol) {
      fixed[static_cast<std::size_t>(i)] = 1;
      t[i] = diffs[i] > 0.0 ? 1.0 : -1.0;
    } else {
      fixed[static_cast<std::size_t>(i)] = 0;
      t[i] = 0.0;
    }
  }

  Eigen::VectorXd b = beta * u;
  auto field_at = [&](Eigen::Index j) {
    double value = smooth[j];
    if (j > 0) value += b[j - 1] * t[j - 1];
    if (j < n - 1) value -= b[j] * t[j];
    return value;
  };

  for (int sweep = 0; sweep < 1000; ++sweep) {
    double change = 0.0;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      if (fixed[static_cast<std::size_t>(i)] || b[i] <= 0.0) continue;
      // Fields with t_i's contribution removed: v_i = base1 - b_i t_i,
      // v_{i+1} = base2 + b_i t_i.
      const double base1 = field_at(i) + b[i] * t[i];
      const double base2 = field_at(i + 1) - b[i] * t[i];
      const double updated =
          detail::kkt_line_min(base1, active[static_cast<std::size_t>(i)], base2,
                               active[static_cast<std::size_t>(i + 1)], b[i]);
      change = std::max(change, std::abs(updated - t[i]));
      t[i] = updated;
    }
    if (change < 1e-13) break;
  }

  double sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double r = coordinate_penalty(j, field_at(j));
    sum += r * r;
  }
  return std::sqrt(sum);
}

namespace detail {

double kkt_line_min(double a1, bool active1, double a2, bool active2, double b) {
  if (b <= 0.0) return 0.0;
  auto dphi = [&](double t) {
    const double p = a1 - b * t;
    const double q = a2 + b * t;
    double d = 0.0;
    if (!active1 || p < 0.0) d -= 2.0 * b * p;
    if (!active2 || q < 0.0) d += 2.0 * b * q;
    return d;
  };
  if (dphi(-1.0) >= 0.0) return -1.0;
  if (dphi(1.0) <= 0.0) return 1.0;

  double pts[4];
  int np = 0;
  pts[np++] = -1.0;
  if (active1) {
    const double tb = a1 / b;
    if (tb > -1.0 && tb < 1.0) pts[np++] = tb;
  }
  if (active2) {
    const double tb = -a2 / b;
    if (tb > -1.0 && tb < 1.0) pts[np++] = tb;
  }
  pts[np++] = 1.0;
  std::sort(pts, pts + np);

  for (int i = 0; i + 1 < np; ++i) {
    const double d0 = dphi(pts[i]);
    const double d1 = dphi(pts[i + 1]);
    if (d0 <= 0.0 && d1 >= 0.0) {
      if (d1 - d0 <= 0.0) return pts[i];
      const double t = pts[i] - d0 * (pts[i + 1] - pts[i]) / (d1 - d0);
      return std::clamp(t, pts[i], pts[i + 1]);
    }
  }
  return 1.0;
}

double kkt_gradient_scale(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, double lambda,
                          const Eigen::VectorXd& w, const Eigen::VectorXd& gamma) {
  MeasurementFactor factor(a, gamma, lambda);
  const Eigen::MatrixXd corr = a.transpose() * factor.solve(y);
  const Eigen::VectorXd smooth =
      static_cast<double>(y.cols()) * w - corr.array().square().rowwise().sum().matrix();
  return std::max(1.0, smooth.cwiseAbs().maxCoeff());
}

}  // namespace detail

}  // namespace tvsbl
