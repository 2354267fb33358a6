// SPDX-License-Identifier: Apache-2.0
// sparseseq command line: data generation, pre-training, classification,
// evaluation and the experiment grid.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sparseseq/datagen/synthetic.hpp"
#include "sparseseq/errors.hpp"
#include "sparseseq/harness/artifacts.hpp"
#include "sparseseq/harness/grid.hpp"
#include "sparseseq/ingest/physionet.hpp"
#include "sparseseq/metrics/metrics.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace sparseseq;

namespace {

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  p.replace_extension();
  return p.string() + suffix;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ingest::Splits load_split_dir(const fs::path& dir) {
  ingest::Splits s;
  s.train = ingest::TrainSplit(ingest::load_dataset(dir / "train.jsonl"));
  s.validation = ingest::ValidationSplit(ingest::load_dataset(dir / "validation.jsonl"));
  if (fs::exists(dir / "test.jsonl")) s.test = ingest::TestSplit(ingest::load_dataset(dir / "test.jsonl"));
  return s;
}

void save_split_dir(const ingest::Splits& s, const fs::path& dir) {
  fs::create_directories(dir);
  ingest::save_dataset(s.train.data, dir / "train.jsonl");
  ingest::save_dataset(s.validation.data, dir / "validation.jsonl");
  ingest::save_dataset(s.test.data, dir / "test.jsonl");
}

harness::ModelSpec model_spec(const std::string& config, const std::string& preset,
                              const std::string& name) {
  if (!config.empty()) return harness::load_model_spec(config, name);
  return harness::ExperimentConfig::preset_named(preset).model(name);
}

std::string default_model_name(enc::Family f, bool apc) {
  std::string n = f == enc::Family::grud ? "GRU-D" : "GRU";
  return apc ? n + "-APC" : n;
}

void log_row(const harness::ResultRow& r) {
  std::fprintf(stderr, "%-12s %-10s %-10s n=%zu run=%zu auprc=%.2f auroc=%.2f %.1fs %s\n",
               r.cell.c_str(), r.model.c_str(), r.mode.c_str(), r.shift, r.run, r.auprc, r.auroc,
               r.wall_seconds, r.status.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"APC pre-training and classification of sparse multivariate time series"};
  app.require_subcommand(1);

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "Generate the two-variable synthetic benchmark");
  datagen::SyntheticParams sp;
  std::string ratio = "1:1", gen_out, gen_split_dir;
  gen->add_option("--n", sp.n_samples, "number of samples")->capture_default_str();
  gen->add_option("--t", sp.seq_len, "sequence length")->capture_default_str();
  gen->add_option("--missing", sp.missing_rate, "missing rate in [0,1)")->capture_default_str();
  gen->add_option("--ratio", ratio, "minority:majority, class 1 is the minority")->capture_default_str();
  gen->add_option("--noise-std", sp.noise_std, "noise standard deviation")->capture_default_str();
  gen->add_option("--p-min", sp.p_min)->capture_default_str();
  gen->add_option("--p-max", sp.p_max)->capture_default_str();
  gen->add_option("--seed", sp.seed)->capture_default_str();
  gen->add_option("--out", gen_out, "dataset file (JSONL)");
  gen->add_option("--split-dir", gen_split_dir, "also write a 60/20/20 split here");

  // split
  auto* spl = app.add_subcommand("split", "Stratified 60/20/20 split of a dataset file");
  std::string spl_data, spl_out;
  std::uint64_t spl_seed = 7;
  spl->add_option("--data", spl_data)->required();
  spl->add_option("--out-dir", spl_out)->required();
  spl->add_option("--seed", spl_seed)->capture_default_str();

  // convert-physionet
  auto* phy = app.add_subcommand("convert-physionet", "Convert PhysioNet 2012 records to JSONL");
  std::string phy_records, phy_outcomes, phy_out;
  ingest::PhysionetOptions phy_opts;
  phy->add_option("--records", phy_records, "directory of per-patient .txt files")->required();
  phy->add_option("--outcomes", phy_outcomes, "Outcomes-*.txt")->required();
  phy->add_option("--resolution", phy_opts.resolution, "time grid in hours")->capture_default_str();
  phy->add_option("--out", phy_out)->required();

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "APC pre-training of an encoder");
  std::string pre_encoder = "gru", pre_scheme, pre_loss, pre_data, pre_config, pre_model,
              pre_out, pre_curve, pre_preset = "desk";
  std::size_t pre_shift = 1;
  std::uint64_t pre_seed = 7;
  pre->add_option("--encoder", pre_encoder, "gru | gru-d")->capture_default_str();
  pre->add_option("--scheme", pre_scheme, "flags | mean | forward | simple | grud");
  auto* pre_shift_opt = pre->add_option("--shift", pre_shift, "time shift factor n");
  pre->add_option("--loss", pre_loss, "masked-mse | l1");
  pre->add_option("--data", pre_data, "training split (JSONL)")->required();
  pre->add_option("--config", pre_config, "hyperparameter JSON");
  pre->add_option("--preset", pre_preset, "paper | desk, when no --config")->capture_default_str();
  pre->add_option("--model", pre_model, "model entry of the config (default from --encoder)");
  pre->add_option("--seed", pre_seed)->capture_default_str();
  pre->add_option("--out", pre_out, "encoder file (JSON)")->required();
  pre->add_option("--loss-curve", pre_curve, "loss CSV (default <out>.loss.csv)");

  // train
  auto* trn = app.add_subcommand("train", "Train a classifier");
  std::string trn_init, trn_mode = "fine-tuned", trn_imb, trn_dir, trn_config, trn_model,
              trn_out, trn_history, trn_selection, trn_encoder = "gru", trn_scheme,
              trn_preset = "desk";
  std::uint64_t trn_seed = 7;
  trn->add_option("--init", trn_init, "pre-trained encoder file");
  trn->add_option("--mode", trn_mode, "frozen | fine-tuned | scratch")->capture_default_str();
  trn->add_option("--imbalance", trn_imb, "none | cw | os | us | os-cw | os-cw:<fraction>");
  trn->add_option("--data-dir", trn_dir, "directory with train.jsonl and validation.jsonl")->required();
  trn->add_option("--encoder", trn_encoder, "gru | gru-d, for scratch")->capture_default_str();
  trn->add_option("--scheme", trn_scheme, "input scheme, for scratch");
  trn->add_option("--config", trn_config, "hyperparameter JSON");
  trn->add_option("--preset", trn_preset, "paper | desk, when no --config")->capture_default_str();
  trn->add_option("--model", trn_model, "model entry of the config");
  trn->add_option("--seed", trn_seed)->capture_default_str();
  trn->add_option("--out", trn_out, "model file (JSON)")->required();
  trn->add_option("--history", trn_history, "per-epoch CSV (default <out>.epochs.csv)");
  trn->add_option("--selection", trn_selection, "selection JSON (default <out>.selection.json)");

  // eval
  auto* evl = app.add_subcommand("eval", "Evaluate a model on a dataset");
  std::string evl_model, evl_data, evl_metrics = "auroc,auprc,f1", evl_out;
  evl->add_option("--model", evl_model)->required();
  evl->add_option("--data", evl_data)->required();
  evl->add_option("--metrics", evl_metrics)->capture_default_str();
  evl->add_option("--out", evl_out, "metrics JSON (default stdout)");

  // grid
  auto* grd = app.add_subcommand("grid", "Run the missingness x imbalance grid");
  std::string grd_spec, grd_out;
  std::size_t grd_workers = 0;
  grd->add_option("--spec", grd_spec, "grid JSON (defaults when omitted)");
  grd->add_option("--workers", grd_workers, "parallel runs (SPARSESEQ_WORKERS overrides)");
  grd->add_option("--out", grd_out, "results CSV, resumed when present")->required();

  // sweep-shift
  auto* swp = app.add_subcommand("sweep-shift", "Compare APC time shifts on one cell");
  std::string swp_spec, swp_ratio = "1:20", swp_model = "GRU-APC", swp_shifts = "0,1,2,5",
              swp_modes = "frozen,fine-tuned", swp_dir, swp_out;
  double swp_missing = 0.3;
  std::size_t swp_runs = 3, swp_workers = 0;
  swp->add_option("--spec", swp_spec, "grid JSON for data size, seed and config");
  swp->add_option("--ratio", swp_ratio)->capture_default_str();
  swp->add_option("--missing", swp_missing)->capture_default_str();
  swp->add_option("--data-dir", swp_dir, "use a split directory instead of a synthetic cell");
  swp->add_option("--model", swp_model)->capture_default_str();
  swp->add_option("--shifts", swp_shifts)->capture_default_str();
  swp->add_option("--modes", swp_modes)->capture_default_str();
  swp->add_option("--runs", swp_runs)->capture_default_str();
  swp->add_option("--workers", swp_workers);
  swp->add_option("--out", swp_out, "results CSV, resumed when present")->required();

  // report
  auto* rep = app.add_subcommand("report", "Summarize a results CSV");
  std::string rep_in, rep_format = "table", rep_out;
  rep->add_option("--in", rep_in)->required();
  rep->add_option("--format", rep_format, "table | csv | plotdata")->capture_default_str();
  rep->add_option("--out", rep_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      std::tie(sp.minority, sp.majority) = harness::parse_ratio(ratio);
      if (gen_out.empty() && gen_split_dir.empty()) throw ConfigError("give --out or --split-dir");
      const auto ds = datagen::build_benchmark(sp);
      if (!gen_out.empty()) ingest::save_dataset(ds, gen_out);
      if (!gen_split_dir.empty()) {
        save_split_dir(ingest::split(ds, {0.6, 0.2, 0.2}, num::derive_seed(sp.seed, {0x5b1175})),
                       gen_split_dir);
      }
      const auto counts = ds.class_counts();
      std::fprintf(stderr, "%zu samples (class 0: %zu, class 1: %zu), observed %.4f\n", ds.size(),
                   counts[0], counts[1], ds.observed_fraction());
    } else if (*spl) {
      const auto ds = ingest::load_dataset(spl_data);
      save_split_dir(ingest::split(ds, {0.6, 0.2, 0.2}, spl_seed), spl_out);
    } else if (*phy) {
      const auto ds = ingest::load_physionet(phy_records, phy_outcomes, phy_opts);
      ingest::save_dataset(ds, phy_out);
      std::fprintf(stderr, "%zu records\n", ds.size());
    } else if (*pre) {
      const auto family = enc::parse_family(pre_encoder);
      harness::ModelSpec m = model_spec(pre_config, pre_preset,
                                        pre_model.empty() ? default_model_name(family, true) : pre_model);
      m.family = family;
      m.scheme = pre_scheme.empty()
                     ? (family == enc::Family::grud ? enc::Scheme::grud : enc::Scheme::flags)
                     : enc::parse_scheme(pre_scheme);
      if (pre_shift_opt->count() > 0) m.shift = pre_shift;
      if (!pre_loss.empty()) m.loss = apc::parse_loss(pre_loss);
      const ingest::TrainSplit train(ingest::load_dataset(pre_data));
      harness::EncoderArtifact a;
      a.encoder = m.encoder(train.data.n_vars());
      a.apc = m.apc_config();
      a.result = apc::pretrain(a.encoder, train, a.apc, pre_seed);
      a.save(pre_out);
      std::ostringstream csv;
      csv << "epoch,loss\n";
      for (std::size_t e = 0; e < a.result.loss_curve.size(); ++e) {
        csv << e + 1 << ',' << exact(a.result.loss_curve[e]) << '\n';
      }
      write_text(pre_curve.empty() ? sibling(pre_out, ".loss.csv") : fs::path(pre_curve), csv.str());
    } else if (*trn) {
      const auto mode = classify::parse_mode(trn_mode);
      const auto data = load_split_dir(trn_dir);
      std::optional<harness::EncoderArtifact> init;
      if (!trn_init.empty()) init = harness::EncoderArtifact::load(trn_init);
      if (mode != classify::Mode::scratch && !init) throw ConfigError("--mode " + trn_mode + " needs --init");

      enc::Family family = init ? init->encoder.family : enc::parse_family(trn_encoder);
      const bool apc_model = mode != classify::Mode::scratch;
      harness::ModelSpec m = model_spec(trn_config, trn_preset,
                                        trn_model.empty() ? default_model_name(family, apc_model) : trn_model);
      m.apc = apc_model;
      if (apc_model) m.mode = mode;
      if (!trn_imb.empty()) m.imbalance = trn_imb;
      enc::EncoderConfig enc_cfg;
      if (init) {
        enc_cfg = init->encoder;
      } else {
        m.family = family;
        m.scheme = trn_scheme.empty()
                       ? (family == enc::Family::grud ? enc::Scheme::grud : enc::Scheme::flags)
                       : enc::parse_scheme(trn_scheme);
        enc_cfg = m.encoder(data.train.data.n_vars());
      }
      const auto plan = m.plan();
      const auto tr = classify::train_classifier(init ? &init->result.params : nullptr, enc_cfg,
                                                 data.train, data.validation, plan, trn_seed,
                                                 init ? &init->result.stats : nullptr);
      tr.model.save(trn_out);
      std::ostringstream csv;
      csv << "stage,epoch,train_loss,val_metric\n";
      for (const auto& e : tr.history) {
        csv << e.stage << ',' << e.epoch << ',' << exact(e.train_loss) << ',' << exact(e.val_metric) << '\n';
      }
      write_text(trn_history.empty() ? sibling(trn_out, ".epochs.csv") : fs::path(trn_history), csv.str());
      json sel = {{"stage", tr.selection.stage},
                  {"epoch", tr.selection.epoch},
                  {"metric", tr.selection.metric},
                  {"metric_name", tr.model.n_classes == 2 ? "auprc" : "f1_weighted"},
                  {"class_weights", tr.weights},
                  {"train_counts", tr.train_counts}};
      write_text(trn_selection.empty() ? sibling(trn_out, ".selection.json") : fs::path(trn_selection),
                 sel.dump(2) + "\n");
    } else if (*evl) {
      const auto model = classify::Model::load(evl_model);
      const auto data = ingest::load_dataset(evl_data);
      const auto m = harness::evaluate(model, data);
      json out = json::object();
      for (const auto& name : split_list(evl_metrics)) {
        if (name == "auroc") {
          out["auroc"] = m.auroc;
        } else if (name == "auprc") {
          out["auprc"] = m.auprc;
        } else if (name == "f1") {
          out["f1_weighted"] = m.f1_weighted;
          out["f1_minority"] = m.f1_minority;
        } else {
          throw ConfigError("unknown metric '" + name + "' (auroc, auprc, f1)");
        }
      }
      out["n"] = data.size();
      if (!m.warnings.empty()) out["warnings"] = m.warnings;
      write_text(evl_out, out.dump(2) + "\n");
    } else if (*grd) {
      auto spec = grd_spec.empty() ? harness::GridSpec{} : harness::GridSpec::load(grd_spec);
      if (grd_workers > 0) spec.workers = grd_workers;
      const auto rows = harness::run_grid(spec, grd_out, log_row);
      std::size_t failed = 0;
      for (const auto& r : rows) failed += !r.ok();
      std::fprintf(stderr, "%zu rows, %zu failed\n", rows.size(), failed);
      return failed == 0 ? 0 : 3;
    } else if (*swp) {
      auto spec = swp_spec.empty() ? harness::GridSpec{} : harness::GridSpec::load(swp_spec);
      if (swp_workers > 0) spec.workers = swp_workers;
      harness::SweepSpec sweep;
      sweep.model = swp_model;
      sweep.runs = swp_runs;
      sweep.shifts.clear();
      for (const auto& s : split_list(swp_shifts)) sweep.shifts.push_back(std::stoul(s));
      sweep.modes.clear();
      for (const auto& s : split_list(swp_modes)) sweep.modes.push_back(classify::parse_mode(s));
      ingest::Splits data;
      std::string cell_id;
      if (!swp_dir.empty()) {
        data = load_split_dir(swp_dir);
        cell_id = fs::path(swp_dir).filename().string();
      } else {
        const auto [a, b] = harness::parse_ratio(swp_ratio);
        const harness::Cell cell{a, b, swp_missing};
        data = harness::make_cell_data(spec, cell);
        cell_id = cell.id();
      }
      const auto rows = harness::sweep_shift(data, cell_id, spec, sweep, swp_out, log_row);
      std::size_t failed = 0;
      for (const auto& r : rows) failed += !r.ok();
      std::fprintf(stderr, "%zu rows, %zu failed\n", rows.size(), failed);
      return failed == 0 ? 0 : 3;
    } else if (*rep) {
      write_text(rep_out, harness::report(harness::read_csv(fs::path(rep_in)),
                                          harness::parse_report_format(rep_format)));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
