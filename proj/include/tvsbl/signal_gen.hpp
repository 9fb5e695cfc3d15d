#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvsbl/model.hpp"

namespace tvsbl {

enum class SparsityClass { Homogeneous, Random, Hybrid };

SparsityClass parse_sparsity_class(const std::string& tag);
std::string to_string(SparsityClass cls);

struct Block {
  int start = 0;
  int length = 0;
};

// Disjoint blocks sorted by start index; total length is the support size K.
struct SparsityPattern {
  std::vector<Block> blocks;
  int signal_length = 0;

  int support_size() const;
  std::vector<int> support() const;  // sorted row indices
};

struct GroundTruth {
  Eigen::MatrixXd x;  // N x L, rows outside the support exactly zero
  std::vector<int> support;
  SparsityPattern pattern;
};

// i.i.d. standard normal entries with every column scaled to unit norm.
Dictionary gen_dictionary(int measurements, int atoms, std::uint64_t seed);

// The three sparsity classes, all with K = 10:
//   homogeneous: 2 non-adjacent blocks of length 5
//   random:      10 distinct singleton components
//   hybrid:      non-adjacent blocks of lengths 4, 3, 1, 1, 1
// Placement is uniform over admissible draws, by redrawing until the
// non-overlap/non-adjacency constraints hold.
SparsityPattern gen_pattern(SparsityClass cls, int signal_length, std::uint64_t seed);

// Support rows i.i.d. N(0, 1/K), identical support across all snapshots.
GroundTruth gen_signals(const SparsityPattern& pattern, int snapshots, int k, std::uint64_t seed);

// Y = A X + noise with i.i.d. N(0, lambda) entries and
//   lambda = E||A x||^2 / (M * 10^(snr_db/10)),
// the expectation evaluated analytically as sum_{i in supp} ||a_i||^2 / K.
MeasurementSet add_noise(const Dictionary& dict, const Eigen::MatrixXd& x, double snr_db,
                         std::uint64_t seed);

// Writes <prefix>_A.txt, _X.txt, _Y.txt, _pattern.txt (rows of start/length)
// and _meta.txt (key = value lines) in the plain-text matrix format.
void dump_dataset(const std::string& prefix, const Dictionary& dict, const GroundTruth& truth,
                  const MeasurementSet& data, double snr_db, std::uint64_t seed);

}  // namespace tvsbl
