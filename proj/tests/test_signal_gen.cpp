#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "tvsbl/errors.hpp"
#include "tvsbl/rng.hpp"
#include "tvsbl/signal_gen.hpp"

using namespace tvsbl;

TEST_CASE("gen_dictionary columns are unit norm and deterministic") {
  const Dictionary a = gen_dictionary(20, 150, 7);
  for (Eigen::Index c = 0; c < a.atoms(); ++c)
    CHECK(std::abs(a.entries.col(c).norm() - 1.0) < 1e-12);

  const Dictionary b = gen_dictionary(20, 150, 7);
  CHECK((a.entries - b.entries).cwiseAbs().maxCoeff() == 0.0);

  const Dictionary other = gen_dictionary(20, 150, 8);
  CHECK((a.entries - other.entries).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("gen_dictionary entries have near-zero mean") {
  const Dictionary a = gen_dictionary(20, 150, 21);
  const double mean = a.entries.mean();
  CHECK(std::abs(mean) < 4.0 / std::sqrt(20.0 * 150.0));
}

TEST_CASE("gen_pattern classes have the documented shapes") {
  std::set<std::vector<int>> seen_starts;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const SparsityPattern homog = gen_pattern(SparsityClass::Homogeneous, 150, seed);
    REQUIRE(homog.blocks.size() == 2);
    CHECK(homog.blocks[0].length == 5);
    CHECK(homog.blocks[1].length == 5);
    CHECK(homog.support_size() == 10);
    CHECK(homog.blocks[1].start > homog.blocks[0].start + homog.blocks[0].length);

    const SparsityPattern random = gen_pattern(SparsityClass::Random, 150, seed);
    REQUIRE(random.blocks.size() == 10);
    for (const Block& b : random.blocks) CHECK(b.length == 1);
    CHECK(random.support_size() == 10);
    std::set<int> distinct;
    for (const Block& b : random.blocks) distinct.insert(b.start);
    CHECK(distinct.size() == 10);

    const SparsityPattern hybrid = gen_pattern(SparsityClass::Hybrid, 150, seed);
    std::multiset<int> lengths;
    for (const Block& b : hybrid.blocks) lengths.insert(b.length);
    CHECK(lengths == std::multiset<int>({1, 1, 1, 3, 4}));
    CHECK(hybrid.support_size() == 10);
    for (std::size_t i = 0; i + 1 < hybrid.blocks.size(); ++i)
      CHECK(hybrid.blocks[i + 1].start >
            hybrid.blocks[i].start + hybrid.blocks[i].length);

    for (const Block& b : homog.blocks) CHECK(b.start + b.length <= 150);
    for (const Block& b : hybrid.blocks) CHECK(b.start + b.length <= 150);
    seen_starts.insert({homog.blocks[0].start, homog.blocks[1].start});
  }
  // Placement varies across seeds.
  CHECK(seen_starts.size() > 50);

  const SparsityPattern again = gen_pattern(SparsityClass::Hybrid, 150, 17);
  const SparsityPattern again2 = gen_pattern(SparsityClass::Hybrid, 150, 17);
  REQUIRE(again.blocks.size() == again2.blocks.size());
  for (std::size_t i = 0; i < again.blocks.size(); ++i) {
    CHECK(again.blocks[i].start == again2.blocks[i].start);
    CHECK(again.blocks[i].length == again2.blocks[i].length);
  }
}

TEST_CASE("gen_signals puts N(0, 1/K) entries exactly on the support") {
  const SparsityPattern pattern = gen_pattern(SparsityClass::Homogeneous, 150, 3);
  const GroundTruth truth = gen_signals(pattern, 5, 10, 11);

  int nonzero_rows = 0;
  for (Eigen::Index r = 0; r < truth.x.rows(); ++r)
    if (truth.x.row(r).cwiseAbs().maxCoeff() > 0.0) ++nonzero_rows;
  CHECK(nonzero_rows == 10);

  const std::vector<int> support = pattern.support();
  for (Eigen::Index r = 0; r < truth.x.rows(); ++r) {
    const bool on = std::binary_search(support.begin(), support.end(), static_cast<int>(r));
    if (!on) CHECK(truth.x.row(r).cwiseAbs().maxCoeff() == 0.0);
  }

  // Sample variance of support entries over many draws within chi-square
  // bounds around 1/K.
  double sum_sq = 0.0;
  long count = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const GroundTruth t = gen_signals(pattern, 5, 10, seed);
    for (int row : t.support) {
      sum_sq += t.x.row(row).squaredNorm();
      count += t.x.cols();
    }
  }
  const double variance = sum_sq / static_cast<double>(count);
  CHECK(variance > 0.9 / 10.0);
  CHECK(variance < 1.1 / 10.0);

  CHECK_THROWS_AS(gen_signals(pattern, 5, 9, 1), ContractViolation);
}

TEST_CASE("add_noise derives lambda analytically") {
  const Dictionary dict = gen_dictionary(20, 150, 5);
  const SparsityPattern pattern = gen_pattern(SparsityClass::Random, 150, 6);
  const GroundTruth truth = gen_signals(pattern, 5, 10, 7);

  const MeasurementSet at_zero = add_noise(dict, truth.x, 0.0, 8);
  CHECK(at_zero.noise_variance == doctest::Approx(0.05).epsilon(1e-9));

  const MeasurementSet at_ten = add_noise(dict, truth.x, 10.0, 8);
  CHECK(at_ten.noise_variance ==
        doctest::Approx(std::pow(10.0, -1.0) / 20.0).epsilon(1e-9));
}

TEST_CASE("add_noise hits the requested SNR empirically") {
  const Dictionary dict = gen_dictionary(20, 150, 13);
  const SparsityPattern pattern = gen_pattern(SparsityClass::Homogeneous, 150, 14);
  const double snr_db = 10.0;

  double signal_energy = 0.0;
  double noise_energy = 0.0;
  double mc_signal_power = 0.0;
  long cols = 0;
  for (std::uint64_t draw = 0; draw < 10000; ++draw) {
    const GroundTruth truth = gen_signals(pattern, 5, 10, derive_seed(1000, draw));
    const MeasurementSet data = add_noise(dict, truth.x, snr_db, derive_seed(2000, draw));
    const Eigen::MatrixXd clean = dict.entries * truth.x;
    signal_energy += clean.squaredNorm();
    noise_energy += (data.y - clean).squaredNorm();
    mc_signal_power += clean.squaredNorm();
    cols += clean.cols();
  }
  const double snr_est = 10.0 * std::log10(signal_energy / noise_energy);
  CHECK(std::abs(snr_est - snr_db) < 0.2);

  // Monte Carlo estimate of E||A x||^2 against the analytic value 1.
  const double mean_power = mc_signal_power / static_cast<double>(cols);
  CHECK(std::abs(mean_power - 1.0) < 0.05);
}

TEST_CASE("generator determinism end to end") {
  const SparsityPattern pattern = gen_pattern(SparsityClass::Hybrid, 150, 3);
  const GroundTruth t1 = gen_signals(pattern, 5, 10, 4);
  const GroundTruth t2 = gen_signals(pattern, 5, 10, 4);
  CHECK((t1.x - t2.x).cwiseAbs().maxCoeff() == 0.0);

  const Dictionary dict = gen_dictionary(20, 150, 5);
  const MeasurementSet d1 = add_noise(dict, t1.x, 5.0, 6);
  const MeasurementSet d2 = add_noise(dict, t1.x, 5.0, 6);
  CHECK((d1.y - d2.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d1.noise_variance == d2.noise_variance);
}

TEST_CASE("gen_pattern rejects tiny signal lengths") {
  CHECK_THROWS_AS(gen_pattern(SparsityClass::Homogeneous, 19, 1), ContractViolation);
  CHECK_THROWS_AS(parse_sparsity_class("blocky"), ContractViolation);
  CHECK(parse_sparsity_class("homogeneous") == SparsityClass::Homogeneous);
  CHECK(to_string(SparsityClass::Hybrid) == "hybrid");
}
