// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion.
//
// Exit status is 0 when every criterion could be evaluated, 1 when one of them
// crashed. With SPARSESEQ_ACCEPTANCE_STRICT=1 a FAIL also exits 1.
// SPARSESEQ_ACCEPTANCE_REUSE=1 resumes the grid results from an earlier run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstdarg>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "oracles.hpp"
#include "sparseseq/apc/apc.hpp"
#include "sparseseq/classify/classifier.hpp"
#include "sparseseq/datagen/synthetic.hpp"
#include "sparseseq/errors.hpp"
#include "sparseseq/harness/grid.hpp"
#include "sparseseq/ingest/physionet.hpp"
#include "sparseseq/metrics/metrics.hpp"
#include "sparseseq/numcore/gradcheck.hpp"

using namespace sparseseq;
using namespace sparseseq::num;
namespace fs = std::filesystem;

namespace {

int failures = 0;
int crashes = 0;

void verdict(const char* id, bool pass, const std::string& detail) {
  std::printf("%s  %-3s %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void guarded(const char* id, const std::function<void()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body();
  } catch (const std::exception& e) {
    std::printf("FAIL  %-3s crashed: %s\n", id, e.what());
    ++failures;
    ++crashes;
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("      (%s took %.1f s)\n", id, s);
  std::fflush(stdout);
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

bool env_flag(const char* name) {
  const char* v = std::getenv(name);
  return v && std::strcmp(v, "1") == 0;
}

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t({r, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

/// Random ragged dataset with missing entries.
ingest::TimeSeriesDataset random_dataset(Rng& rng, std::size_t n, std::size_t t_max, std::size_t d) {
  ingest::TimeSeriesDataset ds;
  for (std::size_t k = 0; k < d; ++k) ds.variable_names.push_back("v" + std::to_string(k));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = 2 + rng.index(t_max - 1);
    std::vector<double> times, values;
    double clock = 0.0;
    for (std::size_t s = 0; s < len; ++s) {
      clock += rng.uniform(0.2, 2.0);
      times.push_back(clock);
      for (std::size_t k = 0; k < d; ++k) {
        values.push_back(rng.bernoulli(0.55) ? rng.normal(0, 1) : std::numeric_limits<double>::quiet_NaN());
      }
    }
    for (std::size_t k = 0; k < d; ++k) values[k] = rng.normal(0, 1);
    ds.samples.push_back(ingest::make_sample("r" + std::to_string(i), times, values, d, static_cast<int>(i % 2)));
  }
  return ds;
}

enc::Batch batch_for(const ingest::TimeSeriesDataset& ds, enc::Scheme scheme) {
  const auto stats = ingest::compute_stats(ingest::TrainSplit(ds));
  const auto view = enc::impute_view(ingest::normalize(ds, stats), ingest::normalized_view(stats), scheme);
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return enc::make_batch(view, idx);
}

// ---------------------------------------------------------------------------

void criterion_1() {
  Rng rng(101);
  double worst_gru = 0, worst_grud = 0, worst_apc = 0, worst_ce = 0;
  const int trials = 10;
  for (int trial = 0; trial < trials; ++trial) {
    const std::size_t d = 1 + rng.index(3), h = 1 + rng.index(8), t = 2 + rng.index(9);
    const auto ds = random_dataset(rng, 3, t, d);
    for (auto family : {enc::Family::gru, enc::Family::grud}) {
      enc::EncoderConfig ec;
      ec.family = family;
      ec.scheme = family == enc::Family::grud ? enc::Scheme::grud : enc::Scheme::flags;
      ec.n_vars = d;
      ec.hidden = h;
      auto params = enc::init_encoder(ec, rng);
      params.merge(apc::init_projection(h, d, rng));
      // keep the decay pre-activations positive so the relu is differentiable
      params.for_each([&](Parameter& p) {
        for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] += rng.uniform(0.05, 0.3);
      });
      const auto batch = batch_for(ds, ec.scheme);
      const double cell = grad_check(
          [&](Graph& g) {
            const auto w = enc::bind_encoder(g, params, ec);
            enc::EncodeOptions opts;
            opts.keep_states = true;
            const auto out = enc::encode(g, w, ec, batch, opts);
            Var loss = sum(square(out.final));
            for (const Var& s : out.states) loss = loss + sum(s);
            return loss;
          },
          params);
      (family == enc::Family::gru ? worst_gru : worst_grud) = std::max(family == enc::Family::gru ? worst_gru : worst_grud, cell);
      apc::ApcConfig cfg;
      cfg.shift = 1;
      const double pipe =
          grad_check([&](Graph& g) { return apc::apc_batch_loss(g, params, ec, cfg, batch); }, params);
      worst_apc = std::max(worst_apc, pipe);
    }
    const std::size_t k = 2 + rng.index(3), n = 1 + rng.index(8);
    ParameterSet logits;
    logits.add("z", random_matrix(n, k, rng, -3, 3));
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng.index(k));
    std::vector<double> w(k);
    for (auto& v : w) v = rng.uniform(0.2, 5.0);
    worst_ce = std::max(worst_ce, grad_check(
        [&](Graph& g) { return classify::weighted_cross_entropy(g.param(logits.at("z")), y, w); }, logits));
  }
  const double worst = std::max({worst_gru, worst_grud, worst_apc, worst_ce});
  verdict("1", worst < 1e-4,
          fmt("gradient check over %d random instances each: GRU %.2e, GRU-D %.2e, APC MaskedMSE %.2e, "
              "weighted CE %.2e (need < 1e-4)",
              trials, worst_gru, worst_grud, worst_apc, worst_ce));
}

void criterion_2() {
  Rng rng(202);
  int trials = 0, identical = 0;
  // loss level: arbitrary finite values in unobserved targets
  for (int trial = 0; trial < 100; ++trial, ++trials) {
    const std::size_t b = 1 + rng.index(4), d = 1 + rng.index(3), steps = 1 + rng.index(6);
    ParameterSet params;
    std::vector<Tensor> targets, masks, perturbed;
    for (std::size_t s = 0; s < steps; ++s) {
      params.add("y" + std::to_string(s), random_matrix(b, d, rng));
      targets.push_back(random_matrix(b, d, rng));
      Tensor m({b, d});
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.bernoulli(0.5);
      m[0] = 1.0;
      masks.push_back(m);
      Tensor p = targets.back();
      const double scale = std::pow(10.0, rng.uniform(-3, 12));
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (m[i] == 0.0) p[i] = rng.uniform(-scale, scale);
      }
      perturbed.push_back(p);
    }
    auto run = [&](const std::vector<Tensor>& tg) {
      params.zero_grad();
      Graph g;
      std::vector<Var> preds;
      for (std::size_t s = 0; s < steps; ++s) preds.push_back(g.param(params.at("y" + std::to_string(s))));
      Var loss = apc::masked_mse(preds, tg, masks);
      g.backward(loss);
      std::vector<double> out{loss.value().item()};
      params.for_each([&](const Parameter& p) {
        for (std::size_t i = 0; i < p.grad.size(); ++i) out.push_back(p.grad[i]);
      });
      return out;
    };
    identical += run(targets) == run(perturbed);
  }
  // pipeline level: encoder gradients through apc_batch_loss
  for (int trial = 0; trial < 40; ++trial, ++trials) {
    const std::size_t d = 1 + rng.index(3);
    const auto ds = random_dataset(rng, 4, 10, d);
    enc::EncoderConfig ec;
    ec.family = trial % 2 ? enc::Family::grud : enc::Family::gru;
    ec.scheme = trial % 2 ? enc::Scheme::grud : enc::Scheme::flags;
    ec.n_vars = d;
    ec.hidden = 1 + rng.index(8);
    auto params = enc::init_encoder(ec, rng);
    params.merge(apc::init_projection(ec.hidden, d, rng));
    const auto batch = batch_for(ds, ec.scheme);
    enc::Batch noisy = batch;
    for (std::size_t t = 0; t < noisy.steps; ++t) {
      for (std::size_t i = 0; i < noisy.values[t].size(); ++i) {
        if (noisy.mask[t][i] == 0.0) noisy.values[t][i] = rng.uniform(-1e9, 1e9);
      }
    }
    auto run = [&](const enc::Batch& bt) {
      params.zero_grad();
      Graph g;
      apc::ApcConfig cfg;
      Var loss = apc::apc_batch_loss(g, params, ec, cfg, bt);
      g.backward(loss);
      std::vector<double> out{loss.value().item()};
      params.for_each([&](const Parameter& p) {
        for (std::size_t i = 0; i < p.grad.size(); ++i) out.push_back(p.grad[i]);
      });
      return out;
    };
    identical += run(batch) == run(noisy);
  }
  verdict("2", identical == trials,
          fmt("MaskedMSE loss and every gradient bit-identical after perturbing unobserved targets: "
              "%d of %d instances (need all)",
              identical, trials));
}

void criterion_3() {
  Rng rng(303);
  int auroc_ok = 0, auprc_ok = 0, f1_ok = 0;
  double auprc_worst = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const auto inst = oracle::random_instance(rng);
    auroc_ok += metrics::auroc(inst.scores, inst.labels) == oracle::auroc_pairs(inst.scores, inst.labels);
    const double err = std::abs(metrics::auprc(inst.scores, inst.labels) -
                                oracle::auprc_thresholds(inst.scores, inst.labels));
    auprc_worst = std::max(auprc_worst, err);
    auprc_ok += err <= 1e-12;
  }
  for (int i = 0; i < n; ++i) {
    const std::size_t k = 2 + rng.index(4), m = 1 + rng.index(200);
    std::vector<int> y(m), p(m);
    for (std::size_t j = 0; j < m; ++j) {
      y[j] = static_cast<int>(rng.index(k));
      p[j] = rng.bernoulli(0.6) ? y[j] : static_cast<int>(rng.index(k));
    }
    const auto r = metrics::f1_scores(p, y, k);
    const auto o = oracle::f1_confusion(p, y, k);
    f1_ok += r.per_class == o.per_class && r.weighted == o.weighted && r.weighted_minority == o.weighted_minority;
  }
  verdict("3", auroc_ok == n && auprc_ok == n && f1_ok == n,
          fmt("metric oracles on %d random instances each (N <= 200): AUROC exact %d, AUPRC within 1e-12 %d "
              "(worst %.1e), weighted F1 exact %d",
              n, auroc_ok, auprc_ok, auprc_worst, f1_ok));
}

// Synthetic cells ------------------------------------------------------------

struct CellResults {
  std::map<std::string, std::vector<double>> auprc;  // model -> per run
  std::map<std::string, std::size_t> failed;
};

std::map<std::string, CellResults> by_cell(const harness::ResultsTable& rows) {
  std::map<std::string, CellResults> out;
  for (const auto& r : rows) {
    if (r.ok()) {
      out[r.cell].auprc[r.model].push_back(r.auprc);
    } else {
      ++out[r.cell].failed[r.model];
      std::printf("      run failed: %s %s run %zu: %s\n", r.cell.c_str(), r.model.c_str(), r.run, r.status.c_str());
    }
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : metrics::summarize(v).mean;
}

harness::GridSpec acceptance_grid() {
  harness::GridSpec g;  // desk preset, 2000 samples of length 100
  g.runs = 3;
  g.master_seed = 7;
  g.workers = harness::resolve_workers(1);
  return g;
}

fs::path results_path(const std::string& name) {
  const fs::path p = fs::current_path() / ("acceptance_" + name + ".csv");
  if (!env_flag("SPARSESEQ_ACCEPTANCE_REUSE")) {
    fs::remove(p);
    fs::remove(p.string() + ".spec.json");
  }
  return p;
}

void progress(const harness::ResultRow& r) {
  std::printf("      %-9s %-10s %-10s n=%zu run %zu  AUPRC %6.2f  %.0f s\n", r.cell.c_str(), r.model.c_str(),
              r.mode.c_str(), r.shift, r.run, r.auprc, r.wall_seconds);
  std::fflush(stdout);
}

harness::ResultsTable severe_rows;

void criterion_4() {
  auto g = acceptance_grid();
  g.imbalance = {{1, 1}};
  g.missing = {0.0};
  const auto rows = harness::run_grid(g, results_path("balanced"), progress);
  std::printf("%s", harness::report(rows, harness::ReportFormat::table).c_str());
  auto cells = by_cell(rows);
  const auto& c = cells["1:1/0"];
  bool pass = true;
  std::string detail;
  for (const auto& m : g.models) {
    const auto it = c.auprc.find(m);
    const double mean = it == c.auprc.end() ? std::numeric_limits<double>::quiet_NaN() : mean_of(it->second);
    const bool complete = it != c.auprc.end() && it->second.size() == g.runs;
    pass = pass && complete && mean >= 95.0;
    detail += fmt("%s %.2f, ", m.c_str(), mean);
  }
  verdict("4", pass, "balanced 0% missing, mean AUPRC over 3 runs: " + detail + "(need each >= 95)");
}

void criterion_5() {
  auto g = acceptance_grid();
  g.imbalance = {{1, 20}};
  g.missing = {0.3, 0.6};
  severe_rows = harness::run_grid(g, results_path("severe"), progress);
  std::printf("%s", harness::report(severe_rows, harness::ReportFormat::table).c_str());
  auto cells = by_cell(severe_rows);
  auto complete = [&](const CellResults& c, const std::string& m) {
    const auto it = c.auprc.find(m);
    return it != c.auprc.end() && it->second.size() == g.runs;
  };
  {
    auto& c = cells["1:20/0.3"];
    const double apc = mean_of(c.auprc["GRU-APC"]), gru = mean_of(c.auprc["GRU"]);
    const bool ok = complete(c, "GRU-APC") && complete(c, "GRU") && apc - gru >= 40.0;
    verdict("5a", ok,
            fmt("1:20, 30%% missing: GRU-APC %.2f vs scratch GRU %.2f, gap %.2f (need >= 40)", apc, gru, apc - gru));
  }
  {
    auto& c = cells["1:20/0.6"];
    const double apc = mean_of(c.auprc["GRU-D-APC"]), gru = mean_of(c.auprc["GRU"]);
    const bool ok = complete(c, "GRU-D-APC") && complete(c, "GRU") && apc >= 45.0 && apc - gru >= 30.0;
    verdict("5b", ok,
            fmt("1:20, 60%% missing: GRU-D-APC %.2f (need >= 45) vs scratch GRU %.2f, gap %.2f (need >= 30)", apc,
                gru, apc - gru));
  }
}

void criterion_6() {
  auto g = acceptance_grid();
  const harness::Cell cell{1, 20, 0.3};
  const auto data = harness::make_cell_data(g, cell);
  harness::SweepSpec s;
  s.model = "GRU-APC";
  s.shifts = {0};
  s.modes = {classify::Mode::fine_tuned};
  s.runs = 3;
  const auto n0 = harness::sweep_shift(data, cell.id(), g, s, results_path("shift0"), progress);
  // n = 1 fine-tuned with the same seeds is the grid's GRU-APC row
  if (severe_rows.empty()) {
    auto one = g;
    one.imbalance = {{1, 20}};
    one.missing = {0.3};
    one.models = {"GRU-APC"};
    severe_rows = harness::run_grid(one, results_path("shift1"), progress);
  }
  std::vector<double> a0, a1;
  for (const auto& r : n0) {
    if (r.ok()) a0.push_back(r.auprc);
  }
  for (const auto& r : severe_rows) {
    if (r.ok() && r.cell == cell.id() && r.model == "GRU-APC" && r.shift == 1) a1.push_back(r.auprc);
  }
  const double m0 = mean_of(a0), m1 = mean_of(a1);
  verdict("6", a0.size() == 3 && a1.size() == 3 && m1 >= m0,
          fmt("1:20, 30%% missing, GRU-APC fine-tuned: n=1 %.2f vs n=0 %.2f (need n=1 >= n=0)", m1, m0));
}

void criterion_7() {
  // frozen encoder bytes
  datagen::SyntheticParams p;
  p.n_samples = 200;
  p.seq_len = 30;
  p.missing_rate = 0.3;
  p.minority = 1;
  p.majority = 4;
  const auto splits = ingest::split(datagen::build_benchmark(p), {0.6, 0.2, 0.2}, 3);
  enc::EncoderConfig ec;
  ec.family = enc::Family::grud;
  ec.scheme = enc::Scheme::grud;
  ec.hidden = 8;
  apc::ApcConfig ac;
  ac.epochs = 3;
  const auto pre = apc::pretrain(ec, splits.train, ac, 11);
  classify::TrainPlan plan;
  plan.mode = classify::Mode::frozen;
  plan.stage2 = {1e-2, 5, 32};
  plan.imbalance = classify::Imbalance::parse("os-cw");
  const auto tr = classify::train_classifier(&pre.params, ec, splits.train, splits.validation, plan, 12, &pre.stats);
  bool frozen = true;
  std::size_t compared = 0;
  for (const auto& name : pre.params.names()) {
    if (name.rfind("encoder.", 0) != 0) continue;
    const Tensor& a = pre.params.at(name).value;
    const Tensor& b = tr.model.params.at(name).value;
    frozen = frozen && a.size() == b.size() && std::memcmp(a.raw(), b.raw(), a.size() * sizeof(double)) == 0;
    ++compared;
  }

  // leakage audit: the train-only entry points reject other splits at compile
  // time, and rewriting validation/test changes nothing they produce
  static_assert(!std::is_convertible_v<ingest::ValidationSplit, ingest::TrainSplit>);
  static_assert(!std::is_convertible_v<ingest::TestSplit, ingest::TrainSplit>);
  static_assert(!std::is_invocable_v<decltype(&ingest::compute_stats), const ingest::ValidationSplit&, bool>);
  static_assert(!std::is_invocable_v<decltype(&ingest::resample), const ingest::TestSplit&,
                                     const ingest::ResampleMode&, Rng&>);
  ingest::ValidationSplit moved = splits.validation;
  for (auto& s : moved.data.samples) {
    for (auto& v : s.values) v = 100.0 * v - 7.0;
    s.label = 1 - s.label;
  }
  classify::TrainPlan scratch;
  scratch.stage2 = {1e-2, 2, 32};
  scratch.imbalance = classify::Imbalance::parse("os-cw");
  const auto a = classify::train_classifier(nullptr, ec, splits.train, splits.validation, scratch, 13);
  const auto b = classify::train_classifier(nullptr, ec, splits.train, moved, scratch, 13);
  const auto st = ingest::compute_stats(splits.train);
  const bool no_leak = a.model.stats.mean == st.mean && a.model.stats.std == st.std &&
                       b.model.stats.mean == st.mean && b.model.stats.std == st.std &&
                       a.train_counts == b.train_counts && a.weights == b.weights &&
                       a.history.front().train_loss == b.history.front().train_loss;

  // bit-for-bit reproducibility of a full results table
  harness::GridSpec g;
  g.n_samples = 126;
  g.seq_len = 12;
  g.runs = 2;
  for (auto& [name, m] : g.config.models) {
    m.hidden_units = 4;
    m.epochs = 2;
    m.epochs_step1 = 2;
    m.epochs_step2_3 = 2;
  }
  const auto r1 = harness::run_grid(g);
  g.workers = 2;
  const auto r2 = harness::run_grid(g);
  std::ostringstream s1, s2;
  auto strip = [](harness::ResultsTable t) {
    for (auto& r : t) r.wall_seconds = 0.0;
    return t;
  };
  harness::write_csv(s1, strip(r1));
  harness::write_csv(s2, strip(r2));
  std::size_t ok_rows = 0;
  for (const auto& r : r1) ok_rows += r.ok();
  const bool repro = s1.str() == s2.str() && ok_rows == r1.size();

  verdict("7", frozen && no_leak && repro,
          fmt("frozen mode leaves %zu encoder tensors bit-identical: %s; statistics, resampling and class weights "
              "independent of validation/test: %s; %zu-row results table reproduced bit-for-bit: %s",
              compared, frozen ? "yes" : "no", no_leak ? "yes" : "no", r1.size(), repro ? "yes" : "no"));
}

void criterion_8() {
  const auto s = ingest::aggregate({{2.61, "HR", 80.0}}, {"HR"}, 0.1);
  const bool agg = s.length() == 1 && s.times[0] == 2.6 && s.values[0] == 80.0;
  const auto two = ingest::aggregate({{0.2, "HR", 80.0}, {0.7, "HR", 90.0}}, {"HR"}, 1.0);
  const bool mean = two.length() == 1 && two.values[0] == 85.0;
  std::istringstream rec(
      "Time,Parameter,Value\n00:00,RecordID,140000\n00:00,Age,70\n00:00,Gender,1\n00:00,Height,-1\n"
      "00:00,ICUType,2\n00:00,Weight,80.5\n02:36,HR,80\n02:39,HR,90\n");
  ingest::PhysionetOptions opt;
  opt.resolution = 0.1;
  const auto sample = ingest::parse_physionet_record(rec, "140000", opt);
  const auto hr = static_cast<std::size_t>(std::find(opt.variables.begin(), opt.variables.end(), "HR") -
                                           opt.variables.begin());
  const bool parsed = sample.length() == 1 && sample.times[0] == 2.6 &&
                      sample.value(0, hr, opt.variables.size()) == 85.0 &&
                      sample.static_features == std::vector<double>{70, 1, 0, 2, 80.5};
  verdict("8", agg && mean && parsed,
          fmt("PhysioNet ingest at format level: 2.61 h at 0.1 h resolution lands on bin 2.6 exactly: %s; "
              "bin mean 85: %s; record parse: %s (published PhysioNet scores need the external dataset and are not run)",
              agg ? "yes" : "no", mean ? "yes" : "no", parsed ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
  // optional arguments pick a subset, e.g. `acceptance 1 2 3`
  std::vector<std::string> only(argv + 1, argv + argc);
  auto run = [&](const char* id, void (*body)()) {
    if (only.empty() || std::find(only.begin(), only.end(), id) != only.end()) guarded(id, body);
  };
  std::printf("sparseseq acceptance suite\n");
  run("1", criterion_1);
  run("2", criterion_2);
  run("3", criterion_3);
  run("7", criterion_7);
  run("8", criterion_8);
  run("4", criterion_4);
  run("5", criterion_5);
  run("6", criterion_6);
  std::printf("%d criterion line(s) failed, %d crashed\n", failures, crashes);
  if (crashes > 0) return 1;
  if (failures > 0 && env_flag("SPARSESEQ_ACCEPTANCE_STRICT")) return 1;
  return 0;
}
