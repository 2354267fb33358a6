// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sparseseq/errors.hpp"
#include "sparseseq/harness/artifacts.hpp"
#include "sparseseq/harness/grid.hpp"

using namespace sparseseq;
using namespace sparseseq::harness;
namespace fs = std::filesystem;

namespace {

/// Full 3 x 3 x 4 x 3 grid on data small enough to run in seconds.
GridSpec tiny_grid() {
  GridSpec g;
  g.n_samples = 126;
  g.seq_len = 6;
  g.runs = 3;
  g.config = ExperimentConfig::preset_named("desk");
  for (auto& [name, m] : g.config.models) {
    m.hidden_units = 3;
    m.epochs = 1;
    m.epochs_step1 = 1;
    m.epochs_step2_3 = 1;
  }
  return g;
}

fs::path temp_file(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sparseseq_" + name);
  fs::remove(p);
  return p;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

/// Every field except the wall clock.
bool same_result(const ResultRow& a, const ResultRow& b) {
  return a.key() == b.key() && a.ratio == b.ratio && same_bits(a.missing, b.missing) &&
         a.imbalance == b.imbalance && a.seed == b.seed && same_bits(a.auroc, b.auroc) &&
         same_bits(a.auprc, b.auprc) && same_bits(a.f1_weighted, b.f1_weighted) &&
         same_bits(a.f1_minority, b.f1_minority) && a.selected_epoch == b.selected_epoch &&
         a.status == b.status;
}

ResultRow row(const std::string& model, std::size_t run, double auprc) {
  ResultRow r;
  r.cell = "1:20/0.3";
  r.ratio = "1:20";
  r.missing = 0.3;
  r.model = model;
  r.mode = "scratch";
  r.imbalance = "cw";
  r.run = run;
  r.seed = 1000 + run;
  r.auroc = 50.0 + static_cast<double>(run);
  r.auprc = auprc;
  r.f1_weighted = 0.1 * auprc;
  r.f1_minority = 1.0 / 3.0;
  r.selected_epoch = 7;
  r.wall_seconds = 0.125;
  return r;
}

}  // namespace

TEST_CASE("report aggregates runs as mean and population std") {
  const ResultsTable t{row("GRU", 0, 10), row("GRU", 1, 20), row("GRU", 2, 30)};
  const std::string table = report(t, ReportFormat::table);
  CHECK(table.find("20.0 ± 8.2") != std::string::npos);
  const std::string plot = report(t, ReportFormat::plotdata);
  CHECK(plot.find("1:20,0.29999999999999999,GRU,auprc,3,20,10,30,20,") != std::string::npos);
  CHECK_THROWS_AS(report({}, ReportFormat::table), ConfigError);
  CHECK_THROWS_AS(parse_report_format("html"), ConfigError);
}

TEST_CASE("results CSV round-trips exactly") {
  ResultsTable t{row("GRU", 0, 10.123456789012345), row("GRU-D", 1, 0.1 + 0.2)};
  t[1].status = "error: shift, too large\nsecond line";
  t[1].auroc = std::nan("");
  std::stringstream a;
  write_csv(a, t);
  const auto back = read_csv(a);
  REQUIRE(back.size() == 2);
  CHECK(same_result(back[0], t[0]));
  CHECK(same_bits(back[1].auprc, t[1].auprc));
  CHECK(std::isnan(back[1].auroc));
  CHECK(!back[1].ok());
  std::stringstream b;
  write_csv(b, back);
  CHECK(a.str() == b.str());
  std::stringstream bad("cell,model\n");
  CHECK_THROWS_AS(read_csv(bad), ParseError);
}

TEST_CASE("run seeds are distinct and stable") {
  const auto g = tiny_grid();
  std::set<std::uint64_t> seeds;
  std::size_t count = 0;
  for (const auto& cell : g.cells()) {
    for (const auto& m : g.models) {
      for (std::size_t r = 0; r < g.runs; ++r) {
        seeds.insert(run_seed(g.master_seed, cell.id(), m, r));
        ++count;
      }
    }
  }
  CHECK(seeds.size() == count);
  CHECK(run_seed(7, "1:1/0", "GRU", 0) == run_seed(7, "1:1/0", "GRU", 0));
  CHECK(run_seed(7, "1:1/0", "GRU", 0) != run_seed(8, "1:1/0", "GRU", 0));
}

TEST_CASE("grid cardinality, resume and determinism") {
  auto g = tiny_grid();
  const fs::path csv = temp_file("grid.csv");
  std::size_t computed = 0;
  const auto first = run_grid(g, csv, [&](const ResultRow&) { ++computed; });
  CHECK(first.size() == 108);
  CHECK(computed == 108);
  for (const auto& r : first) CHECK(r.ok());
  CHECK(read_csv(csv).size() == 108);

  // keep the header and 40 rows, as if interrupted
  {
    std::ifstream in(csv);
    std::string line, kept;
    for (int i = 0; i < 41 && std::getline(in, line); ++i) kept += line + "\n";
    in.close();
    std::ofstream(csv, std::ios::trunc) << kept;
  }
  computed = 0;
  g.workers = 3;
  const auto resumed = run_grid(g, csv, [&](const ResultRow&) { ++computed; });
  CHECK(computed == 68);
  REQUIRE(resumed.size() == first.size());
  for (std::size_t i = 0; i < first.size(); ++i) CHECK(same_result(first[i], resumed[i]));
  CHECK(read_csv(csv).size() == 108);

  computed = 0;
  run_grid(g, csv, [&](const ResultRow&) { ++computed; });
  CHECK(computed == 0);

  g.master_seed += 1;
  CHECK_THROWS_AS(run_grid(g, csv), ConfigError);
  fs::remove(csv);
  fs::remove(csv.string() + ".spec.json");
}

TEST_CASE("shift sweep cardinality and per-row errors") {
  auto g = tiny_grid();
  const auto data = make_cell_data(g, {1, 4, 0.3});
  SweepSpec s;
  s.shifts = {0, 1};
  s.runs = 3;
  const auto rows = sweep_shift(data, "1:4/0.3", g, s);
  CHECK(rows.size() == 12);
  for (const auto& r : rows) CHECK(r.ok());

  s.shifts = {1, 6};
  s.runs = 1;
  const auto mixed = sweep_shift(data, "1:4/0.3", g, s);
  REQUIRE(mixed.size() == 4);
  CHECK(mixed[0].ok());
  CHECK(mixed[1].ok());
  CHECK(!mixed[2].ok());
  CHECK(mixed[2].status.find("shift") != std::string::npos);

  // the grid's APC row is the fine-tuned sweep row at the same shift
  g.models = {"GRU-APC"};
  g.imbalance = {{1, 4}};
  g.missing = {0.3};
  g.runs = 1;
  const auto grid_rows = run_grid(g);
  CHECK(same_bits(grid_rows[0].auprc, mixed[1].auprc));
}

TEST_CASE("configuration files") {
  const auto paper = ExperimentConfig::preset_named("paper");
  CHECK(paper.model("GRU").hidden_units == 64);
  CHECK(paper.model("GRU").epochs == 150);
  CHECK(paper.model("GRU-D").hidden_units == 32);
  CHECK(paper.model("GRU-APC").hidden_units == 120);
  CHECK(paper.model("GRU-D-APC").hidden_units == 250);
  CHECK(paper.model("GRU-APC").learning_rate_step2_3 == 1e-4);
  CHECK(paper.model("GRU-APC").plan().mode == classify::Mode::fine_tuned);
  CHECK(!paper.model("GRU-APC").plan().imbalance.class_weights);
  CHECK(paper.model("GRU").plan().imbalance.class_weights);
  CHECK_THROWS_AS(ExperimentConfig::preset_named("huge"), ConfigError);

  const auto back = ExperimentConfig::from_json(paper.to_json());
  CHECK(back.to_json() == paper.to_json());

  nlohmann::ordered_json j = {{"preset", "paper"},
                              {"models", {{"GRU-D-APC", {{"imbalance", "cw"}}},
                                          {"MINE", {{"encoder", "gru-d"}, {"hidden_units", 5}}}}}};
  const auto c = ExperimentConfig::from_json(j);
  CHECK(c.model("GRU-D-APC").plan().imbalance.class_weights);
  CHECK(c.model("MINE").scheme == enc::Scheme::grud);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"models", {{"X", {{"hidden_units", 5}}}}}}), ConfigError);

  const auto spec = GridSpec::from_json(GridSpec{}.to_json());
  CHECK(spec.cells().size() == 9);
  CHECK(spec.cells()[8].id() == "1:20/0.6");
  CHECK_THROWS_AS(GridSpec::from_json({{"runs", 0}}), ConfigError);
  CHECK_THROWS_AS(GridSpec::from_json({{"models", {"LSTM"}}}), ConfigError);
  CHECK(parse_ratio("3:7") == std::pair<double, double>{3.0, 7.0});
  CHECK_THROWS_AS(parse_ratio("3-7"), ConfigError);
}

TEST_CASE("worker count honours the environment") {
  ::setenv("SPARSESEQ_WORKERS", "5", 1);
  CHECK(resolve_workers(2) == 5);
  ::setenv("SPARSESEQ_WORKERS", "zero", 1);
  CHECK_THROWS_AS(resolve_workers(2), ConfigError);
  ::unsetenv("SPARSESEQ_WORKERS");
  CHECK(resolve_workers(2) == 2);
  CHECK(resolve_workers(0) == 1);
}
