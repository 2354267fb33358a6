// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/harness/grid.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "sparseseq/datagen/synthetic.hpp"
#include "sparseseq/errors.hpp"
#include "sparseseq/metrics/metrics.hpp"
#include "sparseseq/numcore/kernels.hpp"

namespace sparseseq::harness {

using json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string fmt_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == ';') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

std::string Cell::id() const { return format_ratio(minority, majority) + "/" + fmt_g(missing); }

std::vector<Cell> GridSpec::cells() const {
  std::vector<Cell> out;
  for (const auto& [a, b] : imbalance) {
    for (double m : missing) out.push_back({a, b, m});
  }
  return out;
}

void GridSpec::validate() const {
  if (imbalance.empty() || missing.empty() || models.empty()) {
    throw ConfigError("grid: imbalance, missing and models must be nonempty");
  }
  if (runs == 0) throw ConfigError("grid: runs must be positive");
  for (const auto& [a, b] : imbalance) {
    if (!(a > 0) || !(b > 0)) throw ConfigError("grid: ratio parts must be positive");
  }
  for (double m : missing) {
    if (!(m >= 0.0 && m < 1.0)) throw ConfigError("grid: missing rate must lie in [0, 1)");
  }
  for (const auto& name : models) config.model(name);
  if (n_samples == 0 || seq_len == 0) throw ConfigError("grid: n_samples and seq_len must be positive");
}

json GridSpec::to_json() const {
  json ratios = json::array();
  for (const auto& [a, b] : imbalance) ratios.push_back(format_ratio(a, b));
  json cfg = config.to_json();
  return {{"imbalance", ratios},
          {"missing", missing},
          {"models", models},
          {"shifts", shifts},
          {"runs", runs},
          {"master_seed", master_seed},
          {"n_samples", n_samples},
          {"seq_len", seq_len},
          {"noise_std", noise_std},
          {"workers", workers},
          {"preset", cfg["preset"]},
          {"models_config", cfg["models"]}};
}

GridSpec GridSpec::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("grid spec must be a JSON object");
  GridSpec g;
  try {
    if (j.contains("imbalance")) {
      g.imbalance.clear();
      for (const auto& r : j["imbalance"]) g.imbalance.push_back(parse_ratio(r.get<std::string>()));
    }
    g.missing = j.value("missing", g.missing);
    g.models = j.value("models", g.models);
    g.shifts = j.value("shifts", g.shifts);
    g.runs = j.value("runs", g.runs);
    g.master_seed = j.value("master_seed", g.master_seed);
    g.n_samples = j.value("n_samples", g.n_samples);
    g.seq_len = j.value("seq_len", g.seq_len);
    g.noise_std = j.value("noise_std", g.noise_std);
    g.workers = j.value("workers", g.workers);
    json cfg = {{"preset", j.value("preset", std::string("desk"))}};
    if (j.contains("models_config")) cfg["models"] = j["models_config"];
    g.config = ExperimentConfig::from_json(cfg);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("grid spec: ") + e.what());
  }
  g.validate();
  return g;
}

GridSpec GridSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string ResultRow::key() const {
  return cell + "|" + model + "|" + mode + "|" + std::to_string(shift) + "|" + std::to_string(run);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

const char* const kHeader =
    "cell,ratio,missing,model,mode,shift,imbalance,run,seed,auroc,auprc,f1_weighted,"
    "f1_minority,selected_epoch,wall_seconds,status";

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw ParseError("bad number '" + s + "'", line);
  return v;
}

std::uint64_t parse_uint(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || s[0] == '-') throw ParseError("bad integer '" + s + "'", line);
  return v;
}

}  // namespace

void write_csv_header(std::ostream& out) { out << kHeader << '\n'; }

void write_csv_row(std::ostream& out, const ResultRow& r) {
  out << r.cell << ',' << r.ratio << ',' << fmt_exact(r.missing) << ',' << r.model << ','
      << r.mode << ',' << r.shift << ',' << r.imbalance << ',' << r.run << ',' << r.seed << ','
      << fmt_exact(r.auroc) << ',' << fmt_exact(r.auprc) << ',' << fmt_exact(r.f1_weighted) << ','
      << fmt_exact(r.f1_minority) << ',' << r.selected_epoch << ',' << fmt_exact(r.wall_seconds)
      << ',' << sanitize(r.status) << '\n';
}

void write_csv(std::ostream& out, const ResultsTable& table) {
  write_csv_header(out);
  for (const auto& r : table) write_csv_row(out, r);
}

ResultsTable read_csv(std::istream& in) {
  ResultsTable table;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (n == 1) {
      if (line != kHeader) throw ParseError("unexpected results header", 1);
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_commas(line);
    if (f.size() != 16) throw ParseError("expected 16 fields, got " + std::to_string(f.size()), n);
    ResultRow r;
    r.cell = f[0];
    r.ratio = f[1];
    r.missing = parse_double(f[2], n);
    r.model = f[3];
    r.mode = f[4];
    r.shift = parse_uint(f[5], n);
    r.imbalance = f[6];
    r.run = parse_uint(f[7], n);
    r.seed = parse_uint(f[8], n);
    r.auroc = parse_double(f[9], n);
    r.auprc = parse_double(f[10], n);
    r.f1_weighted = parse_double(f[11], n);
    r.f1_minority = parse_double(f[12], n);
    r.selected_epoch = parse_uint(f[13], n);
    r.wall_seconds = parse_double(f[14], n);
    r.status = f[15];
    table.push_back(std::move(r));
  }
  if (n == 0) throw ParseError("empty results file");
  return table;
}

ResultsTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return read_csv(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ", " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Seeds and data
// ---------------------------------------------------------------------------

std::uint64_t cell_seed(std::uint64_t master, const std::string& cell) {
  return num::derive_seed(master, {name_hash(cell)});
}

std::uint64_t run_seed(std::uint64_t master, const std::string& cell, const std::string& model,
                       std::size_t run) {
  return num::derive_seed(master, {name_hash(cell), name_hash(model), run});
}

ingest::Splits make_cell_data(const GridSpec& spec, const Cell& cell) {
  datagen::SyntheticParams p;
  p.n_samples = spec.n_samples;
  p.seq_len = spec.seq_len;
  p.noise_std = spec.noise_std;
  p.missing_rate = cell.missing;
  p.minority = cell.minority;
  p.majority = cell.majority;
  p.seed = cell_seed(spec.master_seed, cell.id());
  const auto ds = datagen::build_benchmark(p);
  return ingest::split(ds, {0.6, 0.2, 0.2},
                       num::derive_seed(spec.master_seed, {name_hash(cell.id()), name_hash("split")}));
}

std::size_t resolve_workers(std::size_t configured) {
  if (const char* env = std::getenv("SPARSESEQ_WORKERS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw ConfigError("SPARSESEQ_WORKERS must be a positive integer");
    return static_cast<std::size_t>(v);
  }
  return configured == 0 ? 1 : configured;
}

TestMetrics evaluate(const classify::Model& model, const ingest::TimeSeriesDataset& raw) {
  const num::Tensor probs = classify::predict(model, raw);
  const std::vector<int> labels = raw.labels();
  const std::size_t k = model.n_classes;
  TestMetrics out;
  std::vector<int> pred(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (probs(i, c) > probs(i, best)) best = c;
    }
    pred[i] = static_cast<int>(best);
  }
  out.auroc = out.auprc = kNaN;
  if (k == 2) {
    std::vector<double> scores(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) scores[i] = probs(i, 1);
    try {
      out.auroc = metrics::auroc(scores, labels);
    } catch (const MetricUndefined& e) {
      out.warnings.push_back(e.what());
    }
    try {
      out.auprc = 100.0 * metrics::auprc(scores, labels);
    } catch (const MetricUndefined& e) {
      out.warnings.push_back(e.what());
    }
    if (!std::isnan(out.auroc)) out.auroc *= 100.0;
  }
  const auto f1 = metrics::f1_scores(pred, labels, k);
  out.f1_weighted = f1.weighted;
  out.f1_minority = f1.weighted_minority;
  for (const auto& w : f1.warnings) out.warnings.push_back(w);
  return out;
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::size_t flat_epoch(const classify::TrainResult& tr, const classify::TrainPlan& plan) {
  return tr.selection.stage == 3 ? plan.stage2.epochs + tr.selection.epoch : tr.selection.epoch;
}

void fill_metrics(ResultRow& row, const classify::TrainResult& tr, const classify::TrainPlan& plan,
                  const ingest::Splits& data) {
  const TestMetrics m = evaluate(tr.model, data.test.data);
  row.auroc = m.auroc;
  row.auprc = m.auprc;
  row.f1_weighted = m.f1_weighted;
  row.f1_minority = m.f1_minority;
  row.selected_epoch = flat_epoch(tr, plan);
}

void mark_failed(ResultRow& row, const std::string& what) {
  row.auroc = row.auprc = row.f1_weighted = row.f1_minority = kNaN;
  row.selected_epoch = 0;
  row.status = sanitize("error: " + what);
}

ResultRow blank_row(const Cell& cell, const ModelSpec& m, std::size_t run, std::uint64_t seed) {
  ResultRow r;
  r.cell = cell.id();
  r.ratio = format_ratio(cell.minority, cell.majority);
  r.missing = cell.missing;
  r.model = m.name;
  r.mode = classify::to_string(m.apc ? m.mode : classify::Mode::scratch);
  r.shift = m.apc ? m.shift : 0;
  r.imbalance = m.imbalance;
  r.run = run;
  r.seed = seed;
  return r;
}

/// Serialized CSV sink that keeps completed rows of an earlier invocation.
class Sink {
 public:
  Sink(const std::filesystem::path& path, const Progress& progress)
      : path_(path), progress_(progress) {}

  /// Loads finished rows and rewrites the file with just those. The spec is
  /// kept next to the results; a file written under another spec is refused.
  std::map<std::string, ResultRow> resume(const std::map<std::string, std::uint64_t>& wanted,
                                          const json& fingerprint) {
    std::map<std::string, ResultRow> done;
    if (path_.empty()) return done;
    const std::filesystem::path side = path_.string() + ".spec.json";
    if (std::filesystem::exists(path_) && std::filesystem::exists(side)) {
      std::ifstream in(side);
      json previous;
      try {
        previous = json::parse(in);
      } catch (const json::parse_error&) {
      }
      if (previous != fingerprint) {
        throw ConfigError(path_.string() + " holds results of a different specification; use another output file");
      }
    }
    {
      std::ofstream out(side, std::ios::trunc);
      if (!out) throw ConfigError("cannot write " + side.string());
      out << fingerprint.dump(2) << '\n';
    }
    if (std::filesystem::exists(path_)) {
      for (auto& r : read_csv(path_)) {
        auto it = wanted.find(r.key());
        if (r.ok() && it != wanted.end() && it->second == r.seed) done[r.key()] = std::move(r);
      }
    }
    std::ofstream out(path_, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path_.string());
    write_csv_header(out);
    for (const auto& [k, r] : done) write_csv_row(out, r);
    return done;
  }

  void put(const ResultRow& row) {
    std::lock_guard lock(mu_);
    if (!path_.empty()) {
      std::ofstream out(path_, std::ios::app);
      write_csv_row(out, row);
    }
    if (progress_) progress_(row);
  }

 private:
  std::filesystem::path path_;
  const Progress& progress_;
  std::mutex mu_;
};

/// Runs jobs 0..n-1 on `workers` threads; kernels stay single-threaded when
/// more than one worker is active.
template <typename F>
void parallel_jobs(std::size_t n, std::size_t workers, F&& job) {
  workers = std::min(workers, std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      num::kernels::set_num_threads(1);
      for (std::size_t i = next++; i < n; i = next++) job(i);
    });
  }
}

}  // namespace

ResultsTable run_grid(const GridSpec& spec, const std::filesystem::path& csv_path,
                      const Progress& progress) {
  spec.validate();
  const auto cells = spec.cells();

  struct Job {
    std::size_t cell;
    const ModelSpec* model;
    std::size_t run;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  std::map<std::string, std::uint64_t> wanted;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (const auto& name : spec.models) {
      const ModelSpec& m = spec.config.model(name);
      for (std::size_t r = 0; r < spec.runs; ++r) {
        const std::uint64_t seed = run_seed(spec.master_seed, cells[c].id(), name, r);
        jobs.push_back({c, &m, r, seed});
        wanted[blank_row(cells[c], m, r, seed).key()] = seed;
      }
    }
  }

  json fingerprint = spec.to_json();
  fingerprint.erase("workers");
  Sink sink(csv_path, progress);
  auto done = sink.resume(wanted, {{"grid", fingerprint}});

  std::vector<std::optional<ingest::Splits>> data(cells.size());
  std::vector<std::string> data_error(cells.size());
  std::vector<std::once_flag> built(cells.size());

  ResultsTable rows(jobs.size());
  parallel_jobs(jobs.size(), resolve_workers(spec.workers), [&](std::size_t i) {
    const Job& job = jobs[i];
    const Cell& cell = cells[job.cell];
    ResultRow row = blank_row(cell, *job.model, job.run, job.seed);
    if (auto it = done.find(row.key()); it != done.end()) {
      rows[i] = it->second;
      return;
    }
    const auto t0 = Clock::now();
    try {
      std::call_once(built[job.cell], [&] {
        try {
          data[job.cell] = make_cell_data(spec, cell);
        } catch (const std::exception& e) {
          data_error[job.cell] = e.what();
        }
      });
      if (!data[job.cell]) throw GenerationError(data_error[job.cell]);
      const ingest::Splits& d = *data[job.cell];
      const ModelSpec& m = *job.model;
      const auto enc = m.encoder(d.train.data.n_vars());
      const auto plan = m.plan();
      classify::TrainResult tr;
      if (m.apc) {
        const auto pre = apc::pretrain(enc, d.train, m.apc_config(), num::derive_seed(job.seed, {0}));
        tr = classify::train_classifier(&pre.params, enc, d.train, d.validation, plan,
                                        num::derive_seed(job.seed, {1}), &pre.stats);
      } else {
        tr = classify::train_classifier(nullptr, enc, d.train, d.validation, plan,
                                        num::derive_seed(job.seed, {1}));
      }
      fill_metrics(row, tr, plan, d);
    } catch (const std::exception& e) {
      mark_failed(row, e.what());
    }
    row.wall_seconds = seconds_since(t0);
    sink.put(row);
    rows[i] = std::move(row);
  });
  return rows;
}

ResultsTable sweep_shift(const ingest::Splits& data, const std::string& cell_id,
                         const GridSpec& spec, const SweepSpec& sweep,
                         const std::filesystem::path& csv_path, const Progress& progress) {
  const ModelSpec& base = spec.config.model(sweep.model);
  if (!base.apc) throw ConfigError("sweep-shift needs an APC model, got '" + sweep.model + "'");
  if (sweep.shifts.empty() || sweep.modes.empty() || sweep.runs == 0) {
    throw ConfigError("sweep-shift: shifts, modes and runs must be nonempty");
  }
  for (auto mode : sweep.modes) {
    if (mode == classify::Mode::scratch) throw ConfigError("sweep-shift modes are frozen and fine-tuned");
  }

  // Row identity only; the ratio and missing columns are informational.
  Cell cell;
  const auto slash = cell_id.find('/');
  if (slash != std::string::npos) {
    try {
      std::tie(cell.minority, cell.majority) = parse_ratio(cell_id.substr(0, slash));
      cell.missing = std::stod(cell_id.substr(slash + 1));
    } catch (const std::exception&) {
    }
  }

  struct Job {
    std::size_t shift;
    std::size_t run;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  std::map<std::string, std::uint64_t> wanted;
  auto make_row = [&](const Job& job, classify::Mode mode) {
    ModelSpec m = base;
    m.shift = job.shift;
    m.mode = mode;
    ResultRow r = blank_row(cell, m, job.run, job.seed);
    r.cell = cell_id;
    return r;
  };
  for (std::size_t shift : sweep.shifts) {
    for (std::size_t r = 0; r < sweep.runs; ++r) {
      const Job job{shift, r, run_seed(spec.master_seed, cell_id, base.name, r)};
      jobs.push_back(job);
      for (auto mode : sweep.modes) wanted[make_row(job, mode).key()] = job.seed;
    }
  }

  json fingerprint = spec.to_json();
  fingerprint.erase("workers");
  json modes = json::array();
  for (auto m : sweep.modes) modes.push_back(classify::to_string(m));
  Sink sink(csv_path, progress);
  auto done = sink.resume(wanted, {{"sweep", {{"cell", cell_id},
                                               {"model", sweep.model},
                                               {"shifts", sweep.shifts},
                                               {"modes", modes},
                                               {"runs", sweep.runs},
                                               {"n_train", data.train.data.size()}}},
                                   {"grid", fingerprint}});
  const std::size_t per_job = sweep.modes.size();
  ResultsTable rows(jobs.size() * per_job);

  parallel_jobs(jobs.size(), resolve_workers(spec.workers), [&](std::size_t i) {
    const Job& job = jobs[i];
    std::vector<std::size_t> todo;
    for (std::size_t k = 0; k < per_job; ++k) {
      ResultRow row = make_row(job, sweep.modes[k]);
      if (auto it = done.find(row.key()); it != done.end()) {
        rows[i * per_job + k] = it->second;
      } else {
        todo.push_back(k);
      }
    }
    if (todo.empty()) return;

    const auto t0 = Clock::now();
    std::optional<apc::PretrainResult> pre;
    std::string pre_error;
    ModelSpec m = base;
    m.shift = job.shift;
    try {
      pre = apc::pretrain(m.encoder(data.train.data.n_vars()), data.train, m.apc_config(),
                          num::derive_seed(job.seed, {0}));
    } catch (const std::exception& e) {
      pre_error = e.what();
    }
    const double pre_seconds = seconds_since(t0);

    for (std::size_t k : todo) {
      ResultRow row = make_row(job, sweep.modes[k]);
      const auto t1 = Clock::now();
      try {
        if (!pre) throw ConfigError(pre_error);
        m.mode = sweep.modes[k];
        const auto plan = m.plan();
        const auto tr = classify::train_classifier(&pre->params, m.encoder(data.train.data.n_vars()),
                                                   data.train, data.validation, plan,
                                                   num::derive_seed(job.seed, {1}), &pre->stats);
        fill_metrics(row, tr, plan, data);
      } catch (const std::exception& e) {
        mark_failed(row, e.what());
      }
      row.wall_seconds = pre_seconds + seconds_since(t1);
      sink.put(row);
      rows[i * per_job + k] = std::move(row);
    }
  });
  return rows;
}

}  // namespace sparseseq::harness
