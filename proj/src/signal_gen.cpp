#include "tvsbl/signal_gen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "tvsbl/errors.hpp"
#include "tvsbl/matrix_io.hpp"
#include "tvsbl/rng.hpp"

namespace tvsbl {

namespace {

constexpr int kPlacementRetries = 10000;

bool placement_admissible(std::vector<Block>& blocks) {
  std::sort(blocks.begin(), blocks.end(),
            [](const Block& a, const Block& b) { return a.start < b.start; });
  for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
    // Gap of at least one index keeps blocks from merging.
    if (blocks[i + 1].start <= blocks[i].start + blocks[i].length) return false;
  }
  return true;
}

SparsityPattern place_blocks(const std::vector<int>& lengths, int n, RandomStream& rng) {
  SparsityPattern pattern;
  pattern.signal_length = n;
  for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
    std::vector<Block> blocks;
    blocks.reserve(lengths.size());
    for (int len : lengths) {
      const int start = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(n - len + 1)));
      blocks.push_back({start, len});
    }
    if (placement_admissible(blocks)) {
      pattern.blocks = std::move(blocks);
      return pattern;
    }
  }
  throw InternalError("block placement failed within retry budget");
}

}  // namespace

SparsityClass parse_sparsity_class(const std::string& tag) {
  if (tag == "homogeneous") return SparsityClass::Homogeneous;
  if (tag == "random") return SparsityClass::Random;
  if (tag == "hybrid") return SparsityClass::Hybrid;
  throw ContractViolation("unknown sparsity class '" + tag +
                          "' (expected homogeneous, random or hybrid)");
}

std::string to_string(SparsityClass cls) {
  switch (cls) {
    case SparsityClass::Homogeneous:
      return "homogeneous";
    case SparsityClass::Random:
      return "random";
    case SparsityClass::Hybrid:
      return "hybrid";
  }
  return "unknown";
}

int SparsityPattern::support_size() const {
  int total = 0;
  for (const Block& b : blocks) total += b.length;
  return total;
}

std::vector<int> SparsityPattern::support() const {
  std::vector<int> rows;
  rows.reserve(static_cast<std::size_t>(support_size()));
  for (const Block& b : blocks)
    for (int i = 0; i < b.length; ++i) rows.push_back(b.start + i);
  std::sort(rows.begin(), rows.end());
  return rows;
}

Dictionary gen_dictionary(int measurements, int atoms, std::uint64_t seed) {
  require(measurements >= 1 && atoms >= 1, "dictionary dimensions must be positive");
  RandomStream rng(seed);
  Eigen::MatrixXd a(measurements, atoms);
  for (Eigen::Index r = 0; r < measurements; ++r)
    for (Eigen::Index c = 0; c < atoms; ++c) a(r, c) = rng.normal();
  for (Eigen::Index c = 0; c < atoms; ++c) {
    const double norm = a.col(c).norm();
    if (norm == 0.0) throw InternalError("zero dictionary column drawn");
    a.col(c) /= norm;
  }
  return Dictionary{std::move(a)};
}

SparsityPattern gen_pattern(SparsityClass cls, int signal_length, std::uint64_t seed) {
  require(signal_length >= 20, "signal length must be at least 20");
  RandomStream rng(seed);
  switch (cls) {
    case SparsityClass::Homogeneous:
      return place_blocks({5, 5}, signal_length, rng);
    case SparsityClass::Hybrid:
      return place_blocks({4, 3, 1, 1, 1}, signal_length, rng);
    case SparsityClass::Random: {
      std::set<int> indices;
      while (indices.size() < 10)
        indices.insert(static_cast<int>(rng.bounded(static_cast<std::uint64_t>(signal_length))));
      SparsityPattern pattern;
      pattern.signal_length = signal_length;
      for (int idx : indices) pattern.blocks.push_back({idx, 1});
      return pattern;
    }
  }
  throw ContractViolation("unknown sparsity class");
}

GroundTruth gen_signals(const SparsityPattern& pattern, int snapshots, int k,
                        std::uint64_t seed) {
  require(snapshots >= 1, "snapshot count must be at least 1");
  require(pattern.signal_length >= 1, "pattern has no signal length");
  require(pattern.support_size() == k, "k must equal the pattern support size");

  RandomStream rng(seed);
  GroundTruth truth;
  truth.pattern = pattern;
  truth.support = pattern.support();
  truth.x = Eigen::MatrixXd::Zero(pattern.signal_length, snapshots);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(k));
  for (int row : truth.support)
    for (int l = 0; l < snapshots; ++l) truth.x(row, l) = stddev * rng.normal();
  return truth;
}

MeasurementSet add_noise(const Dictionary& dict, const Eigen::MatrixXd& x, double snr_db,
                         std::uint64_t seed) {
  require(x.rows() == dict.atoms(), "signal rows must match dictionary atom count");
  require_finite(snr_db, "snr_db");
  require_finite(x, "signals");

  // E||A x||^2 = sum_{i in supp} ||a_i||^2 / K, exact for i.i.d. N(0, 1/K)
  // support entries.
  std::vector<int> support;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    if (x.row(r).cwiseAbs().maxCoeff() > 0.0) support.push_back(static_cast<int>(r));
  require(!support.empty(), "signal matrix is identically zero");

  double signal_power = 0.0;
  for (int r : support) signal_power += dict.entries.col(r).squaredNorm();
  signal_power /= static_cast<double>(support.size());

  const double m = static_cast<double>(dict.measurements());
  const double lambda = signal_power / (m * std::pow(10.0, snr_db / 10.0));

  RandomStream rng(seed);
  Eigen::MatrixXd noise(dict.measurements(), x.cols());
  const double stddev = std::sqrt(lambda);
  for (Eigen::Index r = 0; r < noise.rows(); ++r)
    for (Eigen::Index c = 0; c < noise.cols(); ++c) noise(r, c) = stddev * rng.normal();

  MeasurementSet data;
  data.y = dict.entries * x + noise;
  data.noise_variance = lambda;
  return data;
}

void dump_dataset(const std::string& prefix, const Dictionary& dict, const GroundTruth& truth,
                  const MeasurementSet& data, double snr_db, std::uint64_t seed) {
  save_matrix(dict.entries, prefix + "_A.txt");
  save_matrix(truth.x, prefix + "_X.txt");
  save_matrix(data.y, prefix + "_Y.txt");

  Eigen::MatrixXd blocks(static_cast<Eigen::Index>(truth.pattern.blocks.size()), 2);
  for (std::size_t i = 0; i < truth.pattern.blocks.size(); ++i) {
    blocks(static_cast<Eigen::Index>(i), 0) = truth.pattern.blocks[i].start;
    blocks(static_cast<Eigen::Index>(i), 1) = truth.pattern.blocks[i].length;
  }
  save_matrix(blocks, prefix + "_pattern.txt");

  std::ofstream meta(prefix + "_meta.txt");
  if (!meta) throw IoError("cannot open '" + prefix + "_meta.txt' for writing");
  meta.precision(std::numeric_limits<double>::max_digits10);
  meta << "n = " << truth.pattern.signal_length << '\n';
  meta << "m = " << dict.measurements() << '\n';
  meta << "l = " << data.snapshots() << '\n';
  meta << "k = " << truth.pattern.support_size() << '\n';
  meta << "snr_db = " << snr_db << '\n';
  meta << "lambda = " << data.noise_variance << '\n';
  meta << "seed = " << seed << '\n';
}

}  // namespace tvsbl
