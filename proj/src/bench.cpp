#include "tvsbl/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "tvsbl/errors.hpp"
#include "tvsbl/metrics.hpp"
#include "tvsbl/rng.hpp"

namespace tvsbl {

namespace {

// Stream tags for per-trial seed derivation.
constexpr std::uint64_t kTagDictionary = 0xA1;
constexpr std::uint64_t kTagPattern = 0xA2;
constexpr std::uint64_t kTagSignals = 0xA3;
constexpr std::uint64_t kTagNoise = 0xA4;
constexpr std::uint64_t kTagFixedDictionary = 0xB1;

std::uint64_t snr_bits(double snr_db) {
  std::uint64_t bits = 0;
  static_assert(sizeof(bits) == sizeof(snr_db));
  std::memcpy(&bits, &snr_db, sizeof(bits));
  return bits;
}

// Trial seed from stable keys only, so a record does not depend on which
// other grid cells are present or on execution order.
std::uint64_t trial_seed(std::uint64_t master, SparsityClass cls, double snr_db, int trial) {
  std::uint64_t s = derive_seed(master, static_cast<std::uint64_t>(cls) + 1);
  s = derive_seed(s, snr_bits(snr_db));
  return derive_seed(s, static_cast<std::uint64_t>(trial) + 1);
}

std::string format_double(double value, const char* fmt) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), fmt, value);
  return buffer;
}

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        current += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(current);
  return fields;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& text, const std::string& context) {
  try {
    std::size_t pos = 0;
    const double value = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw ContractViolation(context + ": cannot parse number '" + text + "'");
  }
}

long long parse_int(const std::string& text, const std::string& context) {
  try {
    std::size_t pos = 0;
    const long long value = std::stoll(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw ContractViolation(context + ": cannot parse integer '" + text + "'");
  }
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, sep)) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

bool parse_bool(const std::string& text, const std::string& context) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ContractViolation(context + ": cannot parse boolean '" + text + "'");
}

struct TrialData {
  Dictionary dict;
  GroundTruth truth;
  MeasurementSet measurements;
};

TrialData make_trial_data(const ExperimentConfig& cfg, SparsityClass cls, double snr_db,
                          std::uint64_t seed) {
  TrialData data;
  const std::uint64_t dict_seed = cfg.fixed_dictionary
                                      ? derive_seed(cfg.master_seed, kTagFixedDictionary)
                                      : derive_seed(seed, kTagDictionary);
  data.dict = gen_dictionary(cfg.m, cfg.n, dict_seed);
  const SparsityPattern pattern = gen_pattern(cls, cfg.n, derive_seed(seed, kTagPattern));
  data.truth = gen_signals(pattern, cfg.l, cfg.k, derive_seed(seed, kTagSignals));
  data.measurements = add_noise(data.dict, data.truth.x, snr_db, derive_seed(seed, kTagNoise));
  return data;
}

TrialRecord score_one(const TrialData& data, const AlgorithmSpec& algo, int k) {
  TrialRecord record;
  const auto start = std::chrono::steady_clock::now();
  try {
    const SolveReport report = algo.is_baseline
                                   ? msbl_em(data.dict, data.measurements, algo.options)
                                   : tv_sbl(data.dict, data.measurements, algo.reg, algo.options);
    record.nmse = nmse(report.posterior.means, data.truth.x);
    record.f1 = f1_score(top_k_support(report.posterior.means, k), data.truth.support);
    record.outer_iters = report.outer_iters_used;
  } catch (const std::exception&) {
    record.failed = true;
    record.nmse = std::numeric_limits<double>::quiet_NaN();
    record.f1 = std::numeric_limits<double>::quiet_NaN();
  }
  record.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

}  // namespace

AlgorithmSpec AlgorithmSpec::parse(const std::string& text) {
  std::stringstream stream(text);
  std::string tag;
  stream >> tag;
  require(!tag.empty(), "empty algorithm spec");

  double beta = TVRegularizer::kDefaultBeta;
  double eps = TVRegularizer::kDefaultEpsilon;
  std::string label;
  AlgorithmSpec spec;

  std::string token;
  while (stream >> token) {
    const auto eq = token.find('=');
    require(eq != std::string::npos, "algorithm option '" + token + "' is not key=value");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "beta") {
      beta = parse_double(value, "algo beta");
    } else if (key == "eps") {
      eps = parse_double(value, "algo eps");
    } else if (key == "iters") {
      spec.options.max_outer_iters = static_cast<int>(parse_int(value, "algo iters"));
    } else if (key == "tol") {
      spec.options.outer_tol = parse_double(value, "algo tol");
    } else if (key == "label") {
      label = value;
    } else {
      throw ContractViolation("unknown algorithm option '" + key + "'");
    }
  }

  if (tag == "msbl") {
    spec.is_baseline = true;
    spec.reg = TVRegularizer::none();
    spec.label = "msbl";
  } else if (tag == "none") {
    spec.reg = TVRegularizer::none();
    spec.label = "tv-none";
  } else if (tag == "linear-tv") {
    spec.reg = TVRegularizer::linear(beta);
    spec.label = spec.reg.describe();
  } else if (tag == "log-tv") {
    spec.reg = TVRegularizer::log(beta, eps);
    spec.label = spec.reg.describe();
  } else {
    throw ContractViolation("unknown algorithm tag '" + tag +
                            "' (expected msbl, none, linear-tv or log-tv)");
  }
  if (!label.empty()) spec.label = label;
  return spec;
}

std::vector<AlgorithmSpec> ExperimentConfig::default_algorithms() {
  return {AlgorithmSpec::parse("msbl"), AlgorithmSpec::parse("linear-tv"),
          AlgorithmSpec::parse("log-tv")};
}

void ExperimentConfig::apply_quick_preset() {
  trials = 50;
  snr_grid_db = {0, 10, 20};
}

void ExperimentConfig::validate() const {
  require(n >= 1 && m >= 1 && l >= 1 && k >= 1, "dimensions must be positive");
  require(k <= n, "k cannot exceed n");
  require(trials >= 1, "trials must be >= 1");
  require(!snr_grid_db.empty(), "snr grid is empty");
  for (double s : snr_grid_db) require_finite(s, "snr value");
  require(!classes.empty(), "class list is empty");
  require(threads >= 0, "threads must be >= 0");
}

std::vector<TrialRecord> run_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::vector<AlgorithmSpec> algos =
      config.algorithms.empty() ? ExperimentConfig::default_algorithms() : config.algorithms;

  struct Cell {
    SparsityClass cls;
    double snr_db;
    int trial;
  };
  std::vector<Cell> cells;
  cells.reserve(config.classes.size() * config.snr_grid_db.size() *
                static_cast<std::size_t>(config.trials));
  for (SparsityClass cls : config.classes)
    for (double snr : config.snr_grid_db)
      for (int trial = 0; trial < config.trials; ++trial) cells.push_back({cls, snr, trial});

  std::vector<std::vector<TrialRecord>> per_cell(cells.size());
  parallel_for(cells.size(), config.threads, [&](std::size_t idx) {
    const Cell& cell = cells[idx];
    const std::uint64_t seed = trial_seed(config.master_seed, cell.cls, cell.snr_db, cell.trial);
    const TrialData data = make_trial_data(config, cell.cls, cell.snr_db, seed);

    std::vector<TrialRecord> records;
    records.reserve(algos.size());
    for (const AlgorithmSpec& algo : algos) {
      TrialRecord record = score_one(data, algo, config.k);
      record.class_tag = to_string(cell.cls);
      record.snr_db = cell.snr_db;
      record.algorithm = algo.label;
      record.seed = seed;
      record.trial = cell.trial;
      records.push_back(std::move(record));
    }
    per_cell[idx] = std::move(records);
  });

  std::vector<TrialRecord> all;
  for (auto& cell_records : per_cell)
    for (auto& record : cell_records) all.push_back(std::move(record));

  std::sort(all.begin(), all.end(), [](const TrialRecord& a, const TrialRecord& b) {
    return std::tie(a.class_tag, a.snr_db, a.algorithm, a.trial) <
           std::tie(b.class_tag, b.snr_db, b.algorithm, b.trial);
  });
  return all;
}

std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records) {
  require(!records.empty(), "cannot aggregate an empty record set");

  std::map<std::tuple<std::string, double, std::string>, std::vector<const TrialRecord*>> groups;
  for (const TrialRecord& r : records)
    groups[{r.class_tag, r.snr_db, r.algorithm}].push_back(&r);

  std::vector<AggregateRow> rows;
  rows.reserve(groups.size());
  for (const auto& [key, members] : groups) {
    AggregateRow row;
    row.class_tag = std::get<0>(key);
    row.snr_db = std::get<1>(key);
    row.algorithm = std::get<2>(key);
    row.trials = static_cast<int>(members.size());

    std::vector<double> nmses;
    double nmse_sum = 0.0;
    double f1_sum = 0.0;
    for (const TrialRecord* r : members) {
      if (r->failed) {
        ++row.failures;
        continue;
      }
      nmses.push_back(r->nmse);
      nmse_sum += r->nmse;
      f1_sum += r->f1;
    }
    if (!nmses.empty()) {
      const auto count = static_cast<double>(nmses.size());
      row.mean_nmse = nmse_sum / count;
      row.mean_f1 = f1_sum / count;
      std::sort(nmses.begin(), nmses.end());
      const std::size_t mid = nmses.size() / 2;
      row.median_nmse = nmses.size() % 2 == 1 ? nmses[mid]
                                              : 0.5 * (nmses[mid - 1] + nmses[mid]);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void emit_csv(const std::vector<TrialRecord>& records, std::ostream& out, bool record_timing) {
  out << "class,snr_db,algorithm,seed,trial,nmse,f1,outer_iters,wall_time_seconds,failed\n";
  for (const TrialRecord& r : records) {
    out << csv_quote(r.class_tag) << ',' << format_double(r.snr_db, "%.6g") << ','
        << csv_quote(r.algorithm) << ',' << r.seed << ',' << r.trial << ','
        << (r.failed ? "nan" : format_double(r.nmse, "%.12g")) << ','
        << (r.failed ? "nan" : format_double(r.f1, "%.12g")) << ',' << r.outer_iters << ','
        << format_double(record_timing ? r.wall_time_seconds : 0.0, "%.6f") << ','
        << (r.failed ? 1 : 0) << '\n';
  }
}

void emit_csv(const std::vector<TrialRecord>& records, const std::string& path,
              bool record_timing) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  emit_csv(records, out, record_timing);
  if (!out) throw IoError("write to '" + path + "' failed");
}

void emit_csv(const std::vector<AggregateRow>& rows, std::ostream& out) {
  out << "class,snr_db,algorithm,trials,failures,mean_nmse,median_nmse,mean_f1\n";
  for (const AggregateRow& r : rows) {
    out << csv_quote(r.class_tag) << ',' << format_double(r.snr_db, "%.6g") << ','
        << csv_quote(r.algorithm) << ',' << r.trials << ',' << r.failures << ','
        << format_double(r.mean_nmse, "%.12g") << ',' << format_double(r.median_nmse, "%.12g")
        << ',' << format_double(r.mean_f1, "%.12g") << '\n';
  }
}

void emit_csv(const std::vector<AggregateRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  emit_csv(rows, out);
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::vector<TrialRecord> parse_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("records CSV is empty");

  std::vector<TrialRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 10) throw IoError("records CSV row has " +
                                           std::to_string(fields.size()) + " fields, expected 10");
    TrialRecord r;
    r.class_tag = fields[0];
    r.snr_db = parse_double(fields[1], "records CSV snr_db");
    r.algorithm = fields[2];
    r.seed = static_cast<std::uint64_t>(std::stoull(fields[3]));
    r.trial = static_cast<int>(parse_int(fields[4], "records CSV trial"));
    r.nmse = fields[5] == "nan" ? std::numeric_limits<double>::quiet_NaN()
                                : parse_double(fields[5], "records CSV nmse");
    r.f1 = fields[6] == "nan" ? std::numeric_limits<double>::quiet_NaN()
                              : parse_double(fields[6], "records CSV f1");
    r.outer_iters = static_cast<int>(parse_int(fields[7], "records CSV outer_iters"));
    r.wall_time_seconds = parse_double(fields[8], "records CSV wall_time_seconds");
    r.failed = parse_int(fields[9], "records CSV failed") != 0;
    records.push_back(std::move(r));
  }
  return records;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");

  ExperimentConfig cfg;
  cfg.algorithms.clear();
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    const std::string context = path + ":" + std::to_string(line_number);
    if (eq == std::string::npos)
      throw ContractViolation(context + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "n") {
      cfg.n = static_cast<int>(parse_int(value, context));
    } else if (key == "m") {
      cfg.m = static_cast<int>(parse_int(value, context));
    } else if (key == "l") {
      cfg.l = static_cast<int>(parse_int(value, context));
    } else if (key == "k") {
      cfg.k = static_cast<int>(parse_int(value, context));
    } else if (key == "snr_db") {
      cfg.snr_grid_db.clear();
      for (const std::string& item : split_list(value, ','))
        cfg.snr_grid_db.push_back(parse_double(item, context));
    } else if (key == "classes") {
      cfg.classes.clear();
      for (const std::string& item : split_list(value, ','))
        cfg.classes.push_back(parse_sparsity_class(item));
    } else if (key == "trials") {
      cfg.trials = static_cast<int>(parse_int(value, context));
    } else if (key == "master_seed") {
      cfg.master_seed = static_cast<std::uint64_t>(std::stoull(value));
    } else if (key == "out") {
      cfg.output_path = value;
    } else if (key == "threads") {
      cfg.threads = static_cast<int>(parse_int(value, context));
    } else if (key == "fixed_dictionary") {
      cfg.fixed_dictionary = parse_bool(value, context);
    } else if (key == "record_timing") {
      cfg.record_timing = parse_bool(value, context);
    } else if (key == "algo") {
      cfg.algorithms.push_back(AlgorithmSpec::parse(value));
    } else {
      throw ContractViolation(context + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  unsigned worker_count = threads > 0 ? static_cast<unsigned>(threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
  worker_count = static_cast<unsigned>(std::min<std::size_t>(worker_count, count));

  if (worker_count == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(worker_count);
  for (unsigned t = 0; t < worker_count; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace tvsbl
