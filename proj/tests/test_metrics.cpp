#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "tvsbl/errors.hpp"
#include "tvsbl/metrics.hpp"
#include "test_util.hpp"

using namespace tvsbl;
using test_util::random_matrix;

TEST_CASE("nmse basic values") {
  RandomStream rng(2);
  const Eigen::MatrixXd x = random_matrix(6, 3, rng);
  CHECK(nmse(x, x) == 0.0);
  CHECK(nmse(Eigen::MatrixXd::Zero(6, 3), x) == doctest::Approx(1.0));
  CHECK(nmse(2.0 * x, x) == doctest::Approx(1.0));
  CHECK_THROWS_AS(nmse(x, Eigen::MatrixXd::Zero(6, 3)), InputError);
  CHECK_THROWS_AS(nmse(x, Eigen::MatrixXd::Zero(5, 3)), ContractViolation);
}

TEST_CASE("nmse is invariant to matched row permutations") {
  RandomStream rng(3);
  const Eigen::MatrixXd x = random_matrix(5, 2, rng);
  const Eigen::MatrixXd x_hat = random_matrix(5, 2, rng);

  std::vector<int> perm = {4, 2, 0, 3, 1};
  Eigen::MatrixXd xp(5, 2), xhp(5, 2);
  for (int i = 0; i < 5; ++i) {
    xp.row(i) = x.row(perm[i]);
    xhp.row(i) = x_hat.row(perm[i]);
  }
  CHECK(nmse(x_hat, x) == doctest::Approx(nmse(xhp, xp)).epsilon(1e-14));
}

TEST_CASE("top_k_support ranks by row norm with lower-index ties") {
  Eigen::MatrixXd x(3, 1);
  x << 3, 1, 2;
  CHECK(top_k_support(x, 2) == std::vector<int>({0, 2}));

  const Eigen::MatrixXd equal = Eigen::MatrixXd::Ones(4, 2);
  CHECK(top_k_support(equal, 2) == std::vector<int>({0, 1}));

  RandomStream rng(5);
  const Eigen::MatrixXd random = random_matrix(20, 3, rng);
  const auto fast = top_k_support(random, 7);

  // Full-sort oracle.
  std::vector<int> order(20);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return random.row(a).norm() > random.row(b).norm();
  });
  std::vector<int> expected(order.begin(), order.begin() + 7);
  std::sort(expected.begin(), expected.end());
  CHECK(fast == expected);
}

TEST_CASE("threshold_support picks rows above the threshold") {
  Eigen::MatrixXd x(4, 1);
  x << 0.0, 0.5, 2.0, 0.05;
  CHECK(threshold_support(x, 0.1) == std::vector<int>({1, 2}));
}

TEST_CASE("f1_score hand values") {
  std::vector<int> ten(10);
  std::iota(ten.begin(), ten.end(), 0);
  CHECK(f1_score(ten, ten) == 1.0);

  std::vector<int> disjoint = {20, 21, 22};
  CHECK(f1_score(ten, disjoint) == 0.0);

  std::vector<int> shifted(10);
  std::iota(shifted.begin(), shifted.end(), 5);
  CHECK(f1_score(ten, shifted) == doctest::Approx(0.5));
}

TEST_CASE("f1 properties in the equal-size regime") {
  RandomStream rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<int> est, tru;
    for (int i = 0; i < 40; ++i) {
      if (rng.bounded(3) == 0) est.push_back(i);
      if (rng.bounded(3) == 0) tru.push_back(i);
    }
    if (est.empty() || tru.empty()) continue;
    if (est.size() == tru.size())
      CHECK(f1_score(est, tru) == doctest::Approx(f1_score(tru, est)));
  }

  // With |est| = |true| = K, F1 = tp / K exactly.
  std::vector<int> est = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> tru = {0, 1, 2, 3, 4, 50, 51, 52, 53, 54};
  CHECK(f1_score(est, tru) == doctest::Approx(5.0 / 10.0));
}
