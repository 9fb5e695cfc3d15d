#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "tvsbl/baselines.hpp"
#include "tvsbl/mm_outer.hpp"
#include "tvsbl/signal_gen.hpp"

namespace tvsbl {

// One recovery algorithm entry in a sweep: the M-SBL baseline or tv_sbl with
// a concrete regularizer. Parsed from strings like
//   "msbl", "linear-tv beta=0.3", "log-tv beta=1 eps=0.01 iters=30 tol=1e-4".
struct AlgorithmSpec {
  std::string label;
  bool is_baseline = false;
  TVRegularizer reg = TVRegularizer::none();
  SolverOptions options;

  static AlgorithmSpec parse(const std::string& text);
};

struct ExperimentConfig {
  int n = 150;
  int m = 20;
  int l = 5;
  int k = 10;
  std::vector<double> snr_grid_db = {0, 5, 10, 15, 20};
  std::vector<SparsityClass> classes = {SparsityClass::Homogeneous, SparsityClass::Random,
                                        SparsityClass::Hybrid};
  std::vector<AlgorithmSpec> algorithms;  // empty -> defaults()
  int trials = 200;
  std::uint64_t master_seed = 1;
  std::string output_path = "results";
  int threads = 0;                // 0: hardware concurrency
  bool fixed_dictionary = false;  // redraw A per trial by default
  bool record_timing = true;      // false writes wall_time_seconds as 0

  // msbl, linear-tv and log-tv at their default parameters.
  static std::vector<AlgorithmSpec> default_algorithms();

  // trials = 50, snr = {0, 10, 20}.
  void apply_quick_preset();

  void validate() const;
};

struct TrialRecord {
  std::string class_tag;
  double snr_db = 0.0;
  std::string algorithm;
  std::uint64_t seed = 0;  // per-trial data seed
  int trial = 0;
  double nmse = 0.0;
  double f1 = 0.0;
  int outer_iters = 0;
  double wall_time_seconds = 0.0;
  bool failed = false;
};

struct AggregateRow {
  std::string class_tag;
  double snr_db = 0.0;
  std::string algorithm;
  int trials = 0;
  int failures = 0;
  double mean_nmse = 0.0;
  double median_nmse = 0.0;
  double mean_f1 = 0.0;
};

// Runs every configured algorithm on identical per-trial data for each
// (class, snr, trial) cell. Records are deterministic functions of the
// master seed, independent of execution order and thread count; solver
// failures are flagged and the run continues.
std::vector<TrialRecord> run_experiment(const ExperimentConfig& config);

// Mean/median statistics over non-failed trials per (class, snr, algorithm).
std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records);

// CSV emission. Deterministic ordering (class, snr, algorithm, seed), one
// header line, RFC-4180 quoting.
void emit_csv(const std::vector<TrialRecord>& records, std::ostream& out,
              bool record_timing = true);
void emit_csv(const std::vector<TrialRecord>& records, const std::string& path,
              bool record_timing = true);
void emit_csv(const std::vector<AggregateRow>& rows, std::ostream& out);
void emit_csv(const std::vector<AggregateRow>& rows, const std::string& path);

std::vector<TrialRecord> parse_records_csv(std::istream& in);

// Flat key = value config file; '#' starts a comment. Repeated "algo" keys
// accumulate. Unknown keys are errors.
ExperimentConfig load_config(const std::string& path);

// Runs fn(0..count-1) on a bounded pool. threads = 0 uses hardware
// concurrency. Exceptions from fn propagate after the pool drains.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace tvsbl
