#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "tvsbl/baselines.hpp"
#include "tvsbl/errors.hpp"
#include "tvsbl/mm_outer.hpp"
#include "tvsbl/signal_gen.hpp"
#include "test_util.hpp"

using namespace tvsbl;
using test_util::random_matrix;
using test_util::random_uniform_vector;

namespace {

struct Problem {
  Dictionary dict;
  MeasurementSet data;
};

// Planted block-sparse instance.
Problem planted_instance(int n, int m, int l, double snr_db, std::uint64_t seed) {
  Problem p;
  p.dict = gen_dictionary(m, n, derive_seed(seed, 1));
  SparsityPattern pattern;
  pattern.signal_length = n;
  pattern.blocks = {{n / 5, 3}, {n / 2, 3}};
  GroundTruth truth = gen_signals(pattern, l, 6, derive_seed(seed, 2));
  p.data = add_noise(p.dict, truth.x, snr_db, derive_seed(seed, 3));
  return p;
}

}  // namespace

TEST_CASE("logdet_majorizer_weights closed forms on identity dictionaries") {
  Dictionary eye{Eigen::MatrixXd::Identity(2, 2)};
  const Eigen::VectorXd w0 = logdet_majorizer_weights(eye, Eigen::VectorXd::Zero(2), 1.0);
  CHECK(w0[0] == doctest::Approx(1.0));
  CHECK(w0[1] == doctest::Approx(1.0));

  Eigen::VectorXd gamma(2);
  gamma << 1, 3;
  const Eigen::VectorXd w = logdet_majorizer_weights(eye, gamma, 1.0);
  CHECK(w[0] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(0.25));
}

TEST_CASE("logdet_majorizer_weights matches the dense product") {
  RandomStream rng(3);
  const Eigen::MatrixXd a = random_matrix(4, 7, rng);
  const Eigen::VectorXd gamma = random_uniform_vector(7, 0.0, 2.0, rng);
  const double lambda = 0.6;

  const Eigen::VectorXd w = logdet_majorizer_weights({a}, gamma, lambda);
  const Eigen::MatrixXd sigma =
      lambda * Eigen::MatrixXd::Identity(4, 4) + a * gamma.asDiagonal() * a.transpose();
  const Eigen::MatrixXd dense = a.transpose() * sigma.inverse() * a;
  for (Eigen::Index i = 0; i < 7; ++i) {
    CHECK(w[i] == doctest::Approx(dense(i, i)).epsilon(1e-10));
    CHECK(w[i] > 0.0);
  }
}

TEST_CASE("logdet majorization holds on 1000 random pairs") {
  RandomStream rng(5);
  for (int rep = 0; rep < 1000; ++rep) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.bounded(9));
    const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng.bounded(5));
    const Eigen::MatrixXd a = random_matrix(m, n, rng);
    const double lambda = 0.2 + rng.uniform01();
    const Eigen::VectorXd anchor = random_uniform_vector(n, 0.0, 2.0, rng);
    const Eigen::VectorXd other = random_uniform_vector(n, 0.0, 2.0, rng);

    const Eigen::VectorXd w = logdet_majorizer_weights({a}, anchor, lambda);
    MeasurementFactor f_anchor(a, anchor, lambda);
    MeasurementFactor f_other(a, other, lambda);

    const double lhs = f_other.log_det();
    const double rhs = f_anchor.log_det() + w.dot(other - anchor);
    CHECK(lhs <= rhs + 1e-10);

    CHECK(std::abs(f_anchor.log_det() - (f_anchor.log_det() + w.dot(anchor - anchor))) < 1e-10);
  }
}

TEST_CASE("majorized_cost bookkeeping against sbl_cost") {
  RandomStream rng(7);
  const Eigen::MatrixXd a = random_matrix(4, 6, rng);
  const Eigen::MatrixXd y = random_matrix(4, 3, rng);
  const double lambda = 0.5;
  const Eigen::VectorXd gamma_j = random_uniform_vector(6, 0.1, 2.0, rng);
  const double snaps = 3.0;

  const Dictionary dict{a};
  const MeasurementSet data{y, lambda};
  const Eigen::VectorXd w = logdet_majorizer_weights(dict, gamma_j, lambda);
  MeasurementFactor factor(a, gamma_j, lambda);

  SUBCASE("linear penalty: direct identity at the anchor") {
    const TVRegularizer reg = TVRegularizer::linear(0.7);
    const Eigen::VectorXd u = Eigen::VectorXd::Ones(5);
    const double lhs = majorized_cost(dict, data, gamma_j, w, u, reg);
    const double rhs = sbl_cost(dict, data, {gamma_j}, reg) - snaps * factor.log_det() +
                       snaps * w.dot(gamma_j);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }

  SUBCASE("log penalty: identity including the log-tangency constant") {
    const TVRegularizer reg = TVRegularizer::log(0.7, 0.05);
    const Eigen::VectorXd u = log_tv_reweights(gamma_j, 0.05);
    Eigen::VectorXd diffs(5);
    for (int i = 0; i < 5; ++i) diffs[i] = std::abs(gamma_j[i + 1] - gamma_j[i]);

    const double lhs = majorized_cost(dict, data, gamma_j, w, u, reg) +
                       0.7 * (log_tv(gamma_j, 0.05) - (u.array() * diffs.array()).sum());
    const double rhs = sbl_cost(dict, data, {gamma_j}, reg) - snaps * factor.log_det() +
                       snaps * w.dot(gamma_j);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }

  SUBCASE("zero reweights reduce to the beta = 0 value") {
    const Eigen::VectorXd zero_u = Eigen::VectorXd::Zero(5);
    const double with_beta =
        majorized_cost(dict, data, gamma_j, w, zero_u, TVRegularizer::linear(17.0));
    const double without =
        majorized_cost(dict, data, gamma_j, w, zero_u, TVRegularizer::none());
    CHECK(with_beta == doctest::Approx(without));
  }

  SUBCASE("surrogate dominates the true cost") {
    const TVRegularizer reg = TVRegularizer::linear(0.7);
    const Eigen::VectorXd u = Eigen::VectorXd::Ones(5);
    const double shift = snaps * factor.log_det() - snaps * w.dot(gamma_j);
    for (int rep = 0; rep < 50; ++rep) {
      const Eigen::VectorXd gamma = random_uniform_vector(6, 0.0, 2.5, rng);
      const double surrogate = majorized_cost(dict, data, gamma, w, u, reg) + shift;
      CHECK(surrogate >= sbl_cost(dict, data, {gamma}, reg) - 1e-9);
    }
  }
}

TEST_CASE("tv_sbl on zero measurements returns the zero solution") {
  RandomStream rng(11);
  Dictionary dict{random_matrix(4, 12, rng)};
  MeasurementSet data{Eigen::MatrixXd::Zero(4, 2), 0.5};

  for (const TVRegularizer& reg :
       {TVRegularizer::linear(1.0), TVRegularizer::log(1.0, 0.01), TVRegularizer::none()}) {
    const SolveReport report = tv_sbl(dict, data, reg);
    CHECK(report.gamma_final.cwiseAbs().maxCoeff() == 0.0);
    CHECK(report.posterior.means.cwiseAbs().maxCoeff() == 0.0);
    CHECK(report.converged);
  }
}

TEST_CASE("tv_sbl cost trace is non-increasing for both penalties") {
  for (std::uint64_t seed : {31ull, 32ull, 33ull}) {
    const Problem p = planted_instance(24, 10, 3, 15.0, seed);
    for (const TVRegularizer& reg :
         {TVRegularizer::linear(1.0), TVRegularizer::log(1.0, 0.01)}) {
      const SolveReport report = tv_sbl(p.dict, p.data, reg);
      REQUIRE(report.cost_trace.size() >= 2);
      for (std::size_t i = 1; i < report.cost_trace.size(); ++i)
        CHECK(report.cost_trace[i] <= report.cost_trace[i - 1] + 1e-6);
    }
  }
}

TEST_CASE("tv_sbl with beta = 0 matches long-run EM") {
  const int n = 12;
  RandomStream rng(41);
  Dictionary dict = gen_dictionary(n, n, 99);
  Eigen::MatrixXd x = 0.7 * random_matrix(n, 3, rng);
  MeasurementSet data{dict.entries * x, 0.25};
  {
    RandomStream noise_rng(7);
    for (Eigen::Index r = 0; r < data.y.rows(); ++r)
      for (Eigen::Index c = 0; c < data.y.cols(); ++c)
        data.y(r, c) += 0.5 * noise_rng.normal();
  }

  SolverOptions tv_opts;
  tv_opts.max_outer_iters = 400;
  tv_opts.outer_tol = 1e-10;
  const SolveReport tv_report = tv_sbl(dict, data, TVRegularizer::linear(0.0), tv_opts);

  SolverOptions em_opts;
  em_opts.max_outer_iters = 300000;
  em_opts.outer_tol = 1e-14;
  const SolveReport em_report = msbl_em(dict, data, em_opts);

  const double rel = (tv_report.gamma_final - em_report.gamma_final).norm() /
                     em_report.gamma_final.norm();
  CHECK(rel < 1e-4);
}

TEST_CASE("tv_sbl is equivariant under index reversal") {
  const Problem p = planted_instance(20, 8, 3, 12.0, 55);

  Dictionary reversed{p.dict.entries.rowwise().reverse()};
  const TVRegularizer reg = TVRegularizer::log(1.0, 0.01);

  const SolveReport fwd = tv_sbl(p.dict, p.data, reg);
  const SolveReport rev = tv_sbl(reversed, p.data, reg);

  const Eigen::VectorXd rev_back = rev.gamma_final.reverse();
  const double scale = std::max(fwd.gamma_final.norm(), 1e-12);
  CHECK((rev_back - fwd.gamma_final).norm() / scale < 1e-5);
}

TEST_CASE("kkt residual is small at the tv_sbl fixed point") {
  const Problem p = planted_instance(20, 8, 3, 15.0, 77);
  SolverOptions opts;
  opts.max_outer_iters = 200;
  opts.outer_tol = 1e-9;
  const TVRegularizer reg = TVRegularizer::linear(0.5);
  const SolveReport report = tv_sbl(p.dict, p.data, reg, opts);
  REQUIRE(report.converged);

  const double lambda = p.data.noise_variance;
  const Eigen::VectorXd gamma = report.gamma_final.cwiseMax(opts.gamma_floor);
  const Eigen::VectorXd w = logdet_majorizer_weights(p.dict, gamma, lambda);
  const Eigen::VectorXd u = Eigen::VectorXd::Ones(gamma.size() - 1);
  const double residual = kkt_residual(p.dict.entries, p.data.y, lambda, w, u, reg.beta(),
                                       gamma, opts.gamma_floor);
  const double scale =
      detail::kkt_gradient_scale(p.dict.entries, p.data.y, lambda, w, gamma);
  CHECK(residual <= 10.0 * opts.inner.kkt_tol * scale);
}

TEST_CASE("tv_sbl option validation") {
  Dictionary dict{Eigen::MatrixXd::Identity(2, 2)};
  MeasurementSet data{Eigen::MatrixXd::Ones(2, 1), 1.0};

  SolverOptions bad_iters;
  bad_iters.max_outer_iters = 0;
  CHECK_THROWS_AS(tv_sbl(dict, data, TVRegularizer::none(), bad_iters), ContractViolation);

  SolverOptions bad_init;
  bad_init.gamma_init = Eigen::VectorXd::Ones(3);
  CHECK_THROWS_AS(tv_sbl(dict, data, TVRegularizer::none(), bad_init), ContractViolation);

  MeasurementSet bad_lambda{Eigen::MatrixXd::Ones(2, 1), 0.0};
  CHECK_THROWS_AS(tv_sbl(dict, bad_lambda, TVRegularizer::none()), InputError);
}
