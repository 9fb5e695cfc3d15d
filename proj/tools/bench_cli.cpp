#include <CLI11.hpp>

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "tvsbl/bench.hpp"
#include "tvsbl/errors.hpp"
#include "tvsbl/matrix_io.hpp"
#include "tvsbl/metrics.hpp"
#include "tvsbl/rng.hpp"

namespace {

struct CommonOverrides {
  std::string config_path;
  std::vector<std::string> classes;
  std::vector<std::string> algos;
  std::vector<double> snr;
  int trials = -1;
  std::int64_t seed = -1;
  std::string out;
  int threads = -1;
  bool quick = false;
  bool fixed_dict = false;
  bool no_timing = false;
};

tvsbl::ExperimentConfig build_config(const CommonOverrides& o) {
  tvsbl::ExperimentConfig cfg;
  if (!o.config_path.empty()) cfg = tvsbl::load_config(o.config_path);
  if (o.quick) cfg.apply_quick_preset();
  if (!o.snr.empty()) cfg.snr_grid_db = o.snr;
  if (o.trials >= 1) cfg.trials = o.trials;
  if (o.seed >= 0) cfg.master_seed = static_cast<std::uint64_t>(o.seed);
  if (!o.out.empty()) cfg.output_path = o.out;
  if (o.threads >= 0) cfg.threads = o.threads;
  if (o.fixed_dict) cfg.fixed_dictionary = true;
  if (o.no_timing) cfg.record_timing = false;
  if (!o.classes.empty()) {
    cfg.classes.clear();
    for (const std::string& tag : o.classes)
      cfg.classes.push_back(tvsbl::parse_sparsity_class(tag));
  }
  if (!o.algos.empty()) {
    cfg.algorithms.clear();
    for (const std::string& spec : o.algos)
      cfg.algorithms.push_back(tvsbl::AlgorithmSpec::parse(spec));
  }
  return cfg;
}

void print_support(std::ostream& out, const std::vector<int>& support) {
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (i) out << ' ';
    out << support[i];
  }
}

int run_command(const CommonOverrides& overrides) {
  tvsbl::ExperimentConfig cfg = build_config(overrides);
  const auto records = tvsbl::run_experiment(cfg);
  const auto summary = tvsbl::aggregate(records);

  const std::string records_path = cfg.output_path + "_records.csv";
  const std::string summary_path = cfg.output_path + "_summary.csv";
  tvsbl::emit_csv(records, records_path, cfg.record_timing);
  tvsbl::emit_csv(summary, summary_path);

  std::cout << "wrote " << records.size() << " records to " << records_path << "\n";
  std::cout << "wrote " << summary.size() << " summary rows to " << summary_path << "\n";
  int failures = 0;
  for (const auto& r : records) failures += r.failed ? 1 : 0;
  if (failures > 0) std::cout << failures << " trials flagged as failed\n";
  return 0;
}

int demo_command(const CommonOverrides& overrides, const std::string& class_tag, double snr_db,
                 int trial_index, const std::string& dump_gamma_prefix) {
  tvsbl::ExperimentConfig cfg = build_config(overrides);
  cfg.classes = {tvsbl::parse_sparsity_class(class_tag)};
  cfg.snr_grid_db = {snr_db};
  cfg.trials = 1;

  const auto algos = cfg.algorithms.empty() ? tvsbl::ExperimentConfig::default_algorithms()
                                            : cfg.algorithms;

  const std::uint64_t base =
      tvsbl::derive_seed(cfg.master_seed, static_cast<std::uint64_t>(cfg.classes[0]) + 1);
  const std::uint64_t seed = tvsbl::derive_seed(
      tvsbl::derive_seed(base, 0), static_cast<std::uint64_t>(trial_index) + 1);

  const tvsbl::Dictionary dict = tvsbl::gen_dictionary(cfg.m, cfg.n, tvsbl::derive_seed(seed, 1));
  const tvsbl::SparsityPattern pattern =
      tvsbl::gen_pattern(cfg.classes[0], cfg.n, tvsbl::derive_seed(seed, 2));
  const tvsbl::GroundTruth truth =
      tvsbl::gen_signals(pattern, cfg.l, cfg.k, tvsbl::derive_seed(seed, 3));
  const tvsbl::MeasurementSet data =
      tvsbl::add_noise(dict, truth.x, snr_db, tvsbl::derive_seed(seed, 4));

  std::cout << "class=" << class_tag << " snr_db=" << snr_db << " n=" << cfg.n << " m=" << cfg.m
            << " l=" << cfg.l << " k=" << cfg.k << " lambda=" << data.noise_variance << "\n";
  std::cout << "true support: ";
  print_support(std::cout, truth.support);
  std::cout << "\n\n";

  std::cout << std::left << std::setw(34) << "algorithm" << std::setw(14) << "nmse"
            << std::setw(10) << "f1" << std::setw(8) << "iters" << "converged\n";
  for (const auto& algo : algos) {
    const tvsbl::SolveReport report = algo.is_baseline
                                          ? tvsbl::msbl_em(dict, data, algo.options)
                                          : tvsbl::tv_sbl(dict, data, algo.reg, algo.options);
    const double err = tvsbl::nmse(report.posterior.means, truth.x);
    const auto est = tvsbl::top_k_support(report.posterior.means, cfg.k);
    const double f1 = tvsbl::f1_score(est, truth.support);

    std::cout << std::left << std::setw(34) << algo.label << std::setw(14) << err
              << std::setw(10) << f1 << std::setw(8) << report.outer_iters_used
              << (report.converged ? "yes" : "no") << "\n";
    std::cout << "  est support: ";
    print_support(std::cout, est);
    std::cout << "\n";

    if (!dump_gamma_prefix.empty()) {
      Eigen::MatrixXd column = report.gamma_final;
      std::string name = algo.label;
      for (char& c : name)
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
      tvsbl::save_matrix(column, dump_gamma_prefix + "_" + name + "_gamma.txt");
    }
  }
  return 0;
}

int gen_command(const CommonOverrides& overrides, const std::string& class_tag, double snr_db,
                const std::string& prefix) {
  tvsbl::ExperimentConfig cfg = build_config(overrides);
  const tvsbl::SparsityClass cls = tvsbl::parse_sparsity_class(class_tag);
  const std::uint64_t seed = cfg.master_seed;

  const tvsbl::Dictionary dict = tvsbl::gen_dictionary(cfg.m, cfg.n, tvsbl::derive_seed(seed, 1));
  const tvsbl::SparsityPattern pattern =
      tvsbl::gen_pattern(cls, cfg.n, tvsbl::derive_seed(seed, 2));
  const tvsbl::GroundTruth truth =
      tvsbl::gen_signals(pattern, cfg.l, cfg.k, tvsbl::derive_seed(seed, 3));
  const tvsbl::MeasurementSet data =
      tvsbl::add_noise(dict, truth.x, snr_db, tvsbl::derive_seed(seed, 4));

  tvsbl::dump_dataset(prefix, dict, truth, data, snr_db, seed);
  std::cout << "wrote " << prefix << "_{A,X,Y,pattern,meta}.txt\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TV-regularized sparse Bayesian learning benchmark"};
  app.require_subcommand(1);

  CommonOverrides overrides;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", overrides.config_path, "config file (key = value lines)");
    cmd->add_option("--algo", overrides.algos,
                    "algorithm spec, repeatable (msbl | linear-tv | log-tv, e.g. "
                    "\"log-tv beta=1 eps=0.01\")");
    cmd->add_option("--seed", overrides.seed, "master seed");
    cmd->add_option("--threads", overrides.threads, "worker threads (0 = hardware)");
  };

  CLI::App* run = app.add_subcommand("run", "run a Monte Carlo sweep and write CSVs");
  add_common(run);
  run->add_option("--class", overrides.classes, "sparsity classes, repeatable");
  run->add_option("--snr", overrides.snr, "SNR grid in dB, repeatable");
  run->add_option("--trials", overrides.trials, "Monte Carlo trials per cell");
  run->add_option("--out", overrides.out, "output path prefix");
  run->add_flag("--quick", overrides.quick, "preset: trials=50, snr={0,10,20}");
  run->add_flag("--fixed-dict", overrides.fixed_dict, "one dictionary for the whole sweep");
  run->add_flag("--no-timing", overrides.no_timing, "write wall_time_seconds as 0");

  std::string demo_class = "homogeneous";
  double demo_snr = 20.0;
  int demo_trial = 0;
  std::string demo_dump;
  CLI::App* demo = app.add_subcommand("demo", "run one trial and print supports");
  add_common(demo);
  demo->add_option("--class", demo_class, "sparsity class");
  demo->add_option("--snr", demo_snr, "SNR in dB");
  demo->add_option("--trial", demo_trial, "trial index");
  demo->add_option("--dump-gamma", demo_dump, "write per-algorithm gamma profiles to this prefix");

  std::string gen_class = "homogeneous";
  double gen_snr = 20.0;
  std::string gen_prefix = "dataset";
  CLI::App* gen = app.add_subcommand("gen", "dump one generated dataset to matrix files");
  add_common(gen);
  gen->add_option("--class", gen_class, "sparsity class");
  gen->add_option("--snr", gen_snr, "SNR in dB");
  gen->add_option("--out", gen_prefix, "output file prefix");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(overrides);
    if (demo->parsed()) return demo_command(overrides, demo_class, demo_snr, demo_trial, demo_dump);
    if (gen->parsed()) return gen_command(overrides, gen_class, gen_snr, gen_prefix);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
