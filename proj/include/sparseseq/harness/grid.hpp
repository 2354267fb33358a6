// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "sparseseq/harness/config.hpp"

namespace sparseseq::harness {

struct Cell {
  double minority = 1.0;
  double majority = 1.0;
  double missing = 0.0;

  /// e.g. "1:20/0.3"
  std::string id() const;
};

struct GridSpec {
  std::vector<std::pair<double, double>> imbalance{{1, 1}, {3, 7}, {1, 20}};
  std::vector<double> missing{0.0, 0.3, 0.6};
  std::vector<std::string> models{"GRU", "GRU-D", "GRU-APC", "GRU-D-APC"};
  std::vector<std::size_t> shifts{0, 1, 2, 5};
  std::size_t runs = 3;
  std::uint64_t master_seed = 7;
  std::size_t n_samples = 2000;
  std::size_t seq_len = 100;
  double noise_std = 0.1;
  std::size_t workers = 1;
  ExperimentConfig config = ExperimentConfig::preset_named("desk");

  /// Imbalance-major, then missing rate.
  std::vector<Cell> cells() const;
  void validate() const;

  nlohmann::ordered_json to_json() const;
  /// Keys as in to_json; "preset" picks the base config, "models_config"
  /// holds per-model overrides.
  static GridSpec from_json(const nlohmann::ordered_json& j);
  static GridSpec load(const std::filesystem::path& path);
};

struct ResultRow {
  std::string cell;
  std::string ratio;
  double missing = 0.0;
  std::string model;
  std::string mode;
  std::size_t shift = 0;
  std::string imbalance;
  std::size_t run = 0;
  std::uint64_t seed = 0;
  double auroc = 0.0;
  double auprc = 0.0;
  double f1_weighted = 0.0;
  double f1_minority = 0.0;
  std::size_t selected_epoch = 0;
  double wall_seconds = 0.0;
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
  /// Identity of the run: cell, model, mode, shift, run.
  std::string key() const;
};

using ResultsTable = std::vector<ResultRow>;

/// Metric values print with %.17g, so a round-trip is exact.
void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const ResultRow& row);
void write_csv(std::ostream& out, const ResultsTable& table);
ResultsTable read_csv(std::istream& in);
ResultsTable read_csv(const std::filesystem::path& path);

/// Data seed of a cell and seed of one run.
std::uint64_t cell_seed(std::uint64_t master, const std::string& cell);
std::uint64_t run_seed(std::uint64_t master, const std::string& cell, const std::string& model,
                       std::size_t run);

/// Benchmark for a cell, split 60/20/20.
ingest::Splits make_cell_data(const GridSpec& spec, const Cell& cell);

/// Worker count: SPARSESEQ_WORKERS when set, else `configured`; at least 1.
std::size_t resolve_workers(std::size_t configured);

struct TestMetrics {
  double auroc = 0.0;  // NaN unless binary with both classes present
  double auprc = 0.0;
  double f1_weighted = 0.0;
  double f1_minority = 0.0;
  std::vector<std::string> warnings;
};

/// Test-split metrics of a trained model on raw data.
TestMetrics evaluate(const classify::Model& model, const ingest::TimeSeriesDataset& raw);

using Progress = std::function<void(const ResultRow&)>;

/// One row per (cell, model, run). Rows go to `csv_path` as they finish;
/// when the file exists, its ok rows are kept and only the rest is run. The
/// spec is stored beside it as <csv>.spec.json; resuming under a different
/// spec throws ConfigError.
/// Failed runs become rows with status "error: ...". The returned table is in
/// job order whatever the completion order.
ResultsTable run_grid(const GridSpec& spec, const std::filesystem::path& csv_path = {},
                      const Progress& progress = {});

struct SweepSpec {
  std::string model = "GRU-APC";
  std::vector<std::size_t> shifts{0, 1, 2, 5};
  std::vector<classify::Mode> modes{classify::Mode::frozen, classify::Mode::fine_tuned};
  std::size_t runs = 3;
};

/// One pre-training per (shift, run); every mode is trained from it. The run
/// seed does not depend on the shift, so shifts are compared on equal seeds.
ResultsTable sweep_shift(const ingest::Splits& data, const std::string& cell_id,
                         const GridSpec& spec, const SweepSpec& sweep,
                         const std::filesystem::path& csv_path = {},
                         const Progress& progress = {});

enum class ReportFormat { table, csv, plotdata };
ReportFormat parse_report_format(const std::string& name);

/// table: mean ± std AUPRC and AUROC per cell and model. plotdata: median,
/// min and max per (ratio, model, missing). Throws ConfigError on an empty
/// table. Failed rows are left out of the statistics.
std::string report(const ResultsTable& table, ReportFormat format);

}  // namespace sparseseq::harness
