#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "tvsbl/baselines.hpp"
#include "tvsbl/metrics.hpp"
#include "tvsbl/signal_gen.hpp"
#include "test_util.hpp"

using namespace tvsbl;
using test_util::random_matrix;

TEST_CASE("msbl_em on zero measurements follows the scalar recursion") {
  // Oracle: with A = I, lambda = 1 and Y = 0 the EM update decouples into
  // gamma <- gamma / (1 + gamma) per coordinate.
  double oracle = 1.0;
  for (int i = 0; i < 30; ++i) oracle = oracle / (1.0 + oracle);
  CHECK(oracle == doctest::Approx(1.0 / 31.0).epsilon(1e-12));

  const int n = 4;
  Dictionary dict{Eigen::MatrixXd::Identity(n, n)};
  MeasurementSet data{Eigen::MatrixXd::Zero(n, 2), 1.0};
  SolverOptions opts;
  opts.max_outer_iters = 30;
  opts.outer_tol = 0.0;  // run the full 30 iterations
  const SolveReport report = msbl_em(dict, data, opts);
  CHECK(report.outer_iters_used == 30);
  for (int i = 0; i < n; ++i)
    CHECK(report.gamma_final[i] == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("msbl_em scalar fixed point") {
  // Oracle: iterate the scalar EM recursion to convergence.
  double oracle = 1.0;
  for (int i = 0; i < 100000; ++i) {
    const double shrink = oracle / (1.0 + oracle);
    const double next = shrink * shrink * 4.0 + shrink;
    if (std::abs(next - oracle) < 1e-13) {
      oracle = next;
      break;
    }
    oracle = next;
  }
  CHECK(oracle == doctest::Approx(3.0).epsilon(1e-6));

  Dictionary dict{Eigen::MatrixXd::Identity(1, 1)};
  MeasurementSet data{Eigen::MatrixXd::Constant(1, 1, 2.0), 1.0};
  SolverOptions opts;
  opts.max_outer_iters = 100000;
  opts.outer_tol = 1e-13;
  const SolveReport report = msbl_em(dict, data, opts);
  CHECK(report.gamma_final[0] == doctest::Approx(3.0).epsilon(1e-5));
  CHECK(report.posterior.means(0, 0) == doctest::Approx(1.5).epsilon(1e-5));
}

TEST_CASE("msbl_em cost trace is non-increasing") {
  RandomStream rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    Dictionary dict = gen_dictionary(8, 20, 100 + rep);
    SparsityPattern pattern;
    pattern.signal_length = 20;
    pattern.blocks = {{2, 2}, {11, 2}};
    GroundTruth truth = gen_signals(pattern, 3, 4, 200 + rep);
    MeasurementSet data = add_noise(dict, truth.x, 10.0, 300 + rep);

    const SolveReport report = msbl_em(dict, data);
    REQUIRE(report.cost_trace.size() >= 2);
    for (std::size_t i = 1; i < report.cost_trace.size(); ++i)
      CHECK(report.cost_trace[i] <= report.cost_trace[i - 1] + 1e-8);
  }
}

TEST_CASE("msbl_em fixed point scales as s^2 when Y and lambda are rescaled") {
  RandomStream rng(7);
  Dictionary dict = gen_dictionary(6, 9, 42);
  Eigen::MatrixXd y = random_matrix(6, 2, rng);
  const double lambda = 0.3;
  const double s = 3.0;

  SolverOptions opts;
  opts.max_outer_iters = 2000;
  opts.outer_tol = 1e-12;

  const SolveReport base = msbl_em(dict, {y, lambda}, opts);

  SolverOptions scaled_opts = opts;
  scaled_opts.gamma_init = Eigen::VectorXd::Constant(9, s * s);
  const SolveReport scaled = msbl_em(dict, {s * y, s * s * lambda}, scaled_opts);

  const double rel =
      (scaled.gamma_final - s * s * base.gamma_final).norm() /
      std::max(1e-12, (s * s * base.gamma_final).norm());
  CHECK(rel < 1e-6);
}

TEST_CASE("msbl_em recovers an easy support most of the time") {
  const int n = 30;
  const int m = 20;
  const int k = 3;
  int hits = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Dictionary dict = gen_dictionary(m, n, derive_seed(900, seed));
    RandomStream rng(derive_seed(901, seed));
    std::set<int> picked;
    while (picked.size() < static_cast<std::size_t>(k))
      picked.insert(static_cast<int>(rng.bounded(n)));
    SparsityPattern pattern;
    pattern.signal_length = n;
    for (int idx : picked) pattern.blocks.push_back({idx, 1});
    GroundTruth truth = gen_signals(pattern, 3, k, derive_seed(902, seed));
    MeasurementSet data = add_noise(dict, truth.x, 30.0, derive_seed(903, seed));

    const SolveReport report = msbl_em(dict, data);
    const auto est = top_k_support(report.gamma_final, k);
    if (est == truth.support) ++hits;
  }
  CHECK(hits >= 90);
}
