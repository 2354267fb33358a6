// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/classify/classifier.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "sparseseq/errors.hpp"
#include "sparseseq/metrics/metrics.hpp"
#include "sparseseq/numcore/optim.hpp"

namespace sparseseq::classify {

using num::Graph;
using num::Tensor;
using num::Var;
using json = nlohmann::ordered_json;

std::vector<double> class_weights(const std::vector<std::size_t>& counts) {
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  const double k = static_cast<double>(counts.size());
  std::vector<double> w;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw ConfigError("class_weights: class " + std::to_string(c) + " is empty");
    w.push_back(n / (k * static_cast<double>(counts[c])));
  }
  return w;
}

Var weighted_cross_entropy(Var logits, std::span<const int> labels,
                           std::span<const double> weights) {
  const std::size_t b = logits.rows(), k = logits.cols();
  if (labels.size() != b) {
    throw DimensionError("weighted_cross_entropy: " + std::to_string(b) + " rows, " +
                         std::to_string(labels.size()) + " labels");
  }
  if (weights.size() != k) throw DimensionError("weighted_cross_entropy: one weight per class");
  Tensor pick({b, k});
  for (std::size_t r = 0; r < b; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw ContractError("weighted_cross_entropy: label out of range");
    }
    pick(r, y) = weights[y];
  }
  Graph& g = logits.graph();
  Var nll = num::sum(num::mul(num::log_softmax(logits), g.constant(std::move(pick))));
  return num::scale(nll, -1.0 / static_cast<double>(b));
}

Mode parse_mode(const std::string& name) {
  if (name == "scratch") return Mode::scratch;
  if (name == "frozen") return Mode::frozen;
  if (name == "fine-tuned" || name == "fine_tuned") return Mode::fine_tuned;
  throw ConfigError("unknown mode '" + name + "' (frozen|fine-tuned|scratch)");
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::scratch: return "scratch";
    case Mode::frozen: return "frozen";
    case Mode::fine_tuned: return "fine-tuned";
  }
  return "?";
}

Imbalance Imbalance::parse(const std::string& text) {
  Imbalance im;
  if (text == "none") return im;
  if (text == "cw") {
    im.class_weights = true;
  } else if (text == "os") {
    im.resample = ingest::Oversample{};
  } else if (text == "us") {
    im.resample = ingest::Undersample{};
  } else if (text == "os-cw") {
    im.class_weights = true;
    im.resample = ingest::Oversample{};
  } else if (text.rfind("os-cw:", 0) == 0) {
    im.class_weights = true;
    double f = 0.0;
    try {
      std::size_t used = 0;
      f = std::stod(text.substr(6), &used);
      if (used != text.size() - 6) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw ConfigError("imbalance: bad fraction in '" + text + "'");
    }
    im.resample = ingest::OversampleTo{f};
  } else {
    throw ConfigError("unknown imbalance method '" + text + "' (none|cw|os|us|os-cw:<f>)");
  }
  return im;
}

std::string Imbalance::to_string() const {
  if (!resample) return class_weights ? "cw" : "none";
  if (std::holds_alternative<ingest::Undersample>(*resample)) return "us";
  if (std::holds_alternative<ingest::Oversample>(*resample)) return class_weights ? "os-cw" : "os";
  char buf[48];
  std::snprintf(buf, sizeof buf, "os-cw:%g", std::get<ingest::OversampleTo>(*resample).fraction);
  return buf;
}

// ------------------------------------------------------------- serialization

json stats_to_json(const ingest::NormStats& s) {
  std::vector<int> constant(s.constant.begin(), s.constant.end());
  return {{"mean", s.mean},
          {"std", s.std},
          {"constant", constant},
          {"positions", s.positions},
          {"position_mean", s.position_mean}};
}

ingest::NormStats stats_from_json(const json& j) {
  ingest::NormStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  for (int c : j.at("constant").get<std::vector<int>>()) s.constant.push_back(c != 0);
  s.positions = j.value("positions", std::size_t{0});
  s.position_mean = j.value("position_mean", std::vector<double>{});
  if (s.std.size() != s.mean.size() || s.constant.size() != s.mean.size() ||
      s.position_mean.size() != s.positions * s.mean.size()) {
    throw ParseError("normalization stats: inconsistent sizes");
  }
  return s;
}

json Model::to_json() const {
  return {{"kind", "sparseseq-model"}, {"version", 1},
          {"encoder", encoder.to_json()}, {"n_classes", n_classes},
          {"n_static", n_static},         {"stats", stats_to_json(stats)},
          {"parameters", params.to_json()}};
}

Model Model::from_json(const json& j) {
  if (j.value("kind", std::string()) != "sparseseq-model") {
    throw ParseError("not a sparseseq model document");
  }
  Model m;
  m.encoder = enc::EncoderConfig::from_json(j.at("encoder"));
  m.n_classes = j.at("n_classes").get<std::size_t>();
  m.n_static = j.at("n_static").get<std::size_t>();
  m.stats = stats_from_json(j.at("stats"));
  m.params = num::ParameterSet::from_json(j.at("parameters"));
  return m;
}

void Model::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// --------------------------------------------------------------------- head

num::ParameterSet init_head(std::size_t in, std::size_t n_classes, num::Rng& rng) {
  num::ParameterSet ps;
  ps.add("head.W", num::glorot_uniform(in, n_classes, in, n_classes, rng));
  ps.add("head.b", Tensor({1, n_classes}));
  return ps;
}

Var head_logits(Graph& g, num::ParameterSet& params, Var features, const Tensor& statics) {
  Var in = statics.cols() > 0 ? num::concat_cols({features, g.constant(statics)}) : features;
  return num::matmul(in, g.param(params.at("head.W"))) + g.param(params.at("head.b"));
}

namespace {

constexpr std::size_t kEvalBatch = 256;

std::vector<std::size_t> range(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> v(end - begin);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

/// Final encoder states [N x H] for a whole view, inference mode.
Tensor encode_all(num::ParameterSet& params, const enc::EncoderConfig& cfg,
                  const enc::InputView& view) {
  Tensor out({view.size(), cfg.hidden});
  for (std::size_t s = 0; s < view.size(); s += kEvalBatch) {
    const auto idx = range(s, std::min(view.size(), s + kEvalBatch));
    const enc::Batch batch = enc::make_batch(view, idx);
    Graph g(false);
    const Var h = enc::encode(g, enc::bind_encoder(g, params, cfg), cfg, batch).final;
    std::copy(h.value().data().begin(), h.value().data().end(), out.raw() + s * cfg.hidden);
  }
  return out;
}

Tensor rows_of(const Tensor& t, const std::vector<std::size_t>& idx) {
  const std::size_t c = t.cols();
  Tensor out({idx.size(), c});
  for (std::size_t r = 0; r < idx.size(); ++r) std::copy_n(t.raw() + idx[r] * c, c, out.raw() + r * c);
  return out;
}

Tensor statics_of(const enc::InputView& view, const std::vector<std::size_t>& idx) {
  Tensor out({idx.size(), view.n_static});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy(view.statics[idx[r]].begin(), view.statics[idx[r]].end(),
              out.raw() + r * view.n_static);
  }
  return out;
}

Tensor softmax_rows(const Tensor& logits) {
  Graph g(false);
  return num::softmax(g.constant(logits)).value();
}

enc::InputView make_view(const Model& model, const ingest::TimeSeriesDataset& raw) {
  return enc::impute_view(ingest::normalize(raw, model.stats), ingest::normalized_view(model.stats),
                          model.encoder.scheme);
}

}  // namespace

Tensor predict_view(const Model& model, const enc::InputView& view) {
  num::ParameterSet params = model.params;
  Tensor probs({view.size(), model.n_classes});
  for (std::size_t s = 0; s < view.size(); s += kEvalBatch) {
    const auto idx = range(s, std::min(view.size(), s + kEvalBatch));
    const enc::Batch batch = enc::make_batch(view, idx);
    Graph g(false);
    const Var h = enc::encode(g, enc::bind_encoder(g, params, model.encoder), model.encoder, batch).final;
    const Tensor p = num::softmax(head_logits(g, params, h, batch.statics)).value();
    std::copy(p.data().begin(), p.data().end(), probs.raw() + s * model.n_classes);
  }
  return probs;
}

Tensor predict(const Model& model, const ingest::TimeSeriesDataset& raw) {
  if (raw.n_vars() != model.encoder.n_vars || raw.n_static != model.n_static) {
    throw DimensionError("predict: dataset has " + std::to_string(raw.n_vars()) + " variables and " +
                         std::to_string(raw.n_static) + " static features, model expects " +
                         std::to_string(model.encoder.n_vars) + " and " +
                         std::to_string(model.n_static));
  }
  return predict_view(model, make_view(model, raw));
}

double selection_metric(const Tensor& probs, std::span<const int> labels, std::size_t n_classes) {
  if (n_classes == 2) {
    std::vector<double> pos(probs.rows());
    for (std::size_t r = 0; r < pos.size(); ++r) pos[r] = probs(r, 1);
    return metrics::auprc(pos, labels);
  }
  std::vector<int> pred(probs.rows());
  for (std::size_t r = 0; r < pred.size(); ++r) {
    const double* row = probs.raw() + r * n_classes;
    pred[r] = static_cast<int>(std::max_element(row, row + n_classes) - row);
  }
  return metrics::f1_scores(pred, labels, n_classes).weighted;
}

// ----------------------------------------------------------------- training

namespace {

struct Trainer {
  Model& model;
  const enc::InputView& train_view;
  const enc::InputView& val_view;
  std::vector<double> weights;
  std::uint64_t seed;
  num::Rng order_rng;
  num::Rng drop_rng;

  std::vector<EpochRecord> history;
  Selection best{0, 0, -1.0};
  num::ParameterSet best_params;

  Trainer(Model& m, const enc::InputView& tv, const enc::InputView& vv, std::vector<double> w,
          std::uint64_t s)
      : model(m), train_view(tv), val_view(vv), weights(std::move(w)), seed(s),
        order_rng(num::derive_seed(s, {1})), drop_rng(num::derive_seed(s, {2})) {}

  void consider(int stage, std::size_t epoch, double loss, double metric) {
    history.push_back({stage, epoch, loss, metric});
    if (metric > best.metric) {
      best = {stage, epoch, metric};
      best_params = model.params;
    }
  }

  Var dropout(Graph& g, Var h) {
    const double p = model.encoder.dropout;
    if (p <= 0.0) return h;
    return num::mul(h, g.constant(enc::dropout_mask(h.rows(), h.cols(), p, drop_rng)));
  }

  std::vector<std::vector<std::size_t>> batches(std::size_t batch_size) {
    std::vector<std::size_t> order(train_view.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), order_rng.engine());
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t s = 0; s < order.size(); s += batch_size) {
      out.emplace_back(order.begin() + s, order.begin() + std::min(order.size(), s + batch_size));
    }
    return out;
  }

  /// Head only, on cached encoder features.
  void run_frozen(const StageConfig& cfg, int stage) {
    model.params.set_requires_grad("encoder.", false);
    const Tensor train_feat = encode_all(model.params, model.encoder, train_view);
    const Tensor val_feat = encode_all(model.params, model.encoder, val_view);
    const Tensor val_statics = statics_of(val_view, range(0, val_view.size()));
    num::OptimizerState opt;
    opt.config.learning_rate = cfg.learning_rate;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
      double loss_sum = 0.0;
      const auto bs = batches(cfg.batch_size);
      for (const auto& idx : bs) {
        Graph g;
        std::vector<int> y(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) y[r] = train_view.labels[idx[r]];
        Var h = dropout(g, g.constant(rows_of(train_feat, idx)));
        Var loss = weighted_cross_entropy(
            head_logits(g, model.params, h, statics_of(train_view, idx)), y, weights);
        model.params.zero_grad();
        g.backward(loss);
        num::adam_step(model.params, opt);
        loss_sum += loss.value().item();
      }
      Graph g(false);
      const Tensor probs =
          softmax_rows(head_logits(g, model.params, g.constant(val_feat), val_statics).value());
      consider(stage, epoch, loss_sum / static_cast<double>(bs.size()),
               selection_metric(probs, val_view.labels, model.n_classes));
    }
  }

  void run_end_to_end(const StageConfig& cfg, int stage) {
    model.params.set_requires_grad("encoder.", true);
    num::OptimizerState opt;
    opt.config.learning_rate = cfg.learning_rate;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
      double loss_sum = 0.0;
      const auto bs = batches(cfg.batch_size);
      for (const auto& idx : bs) {
        const enc::Batch batch = enc::make_batch(train_view, idx);
        Graph g;
        const enc::GruVars w = enc::bind_encoder(g, model.params, model.encoder);
        Var h = enc::encode(g, w, model.encoder, batch, {true, &drop_rng, false}).final;
        Var loss = weighted_cross_entropy(
            head_logits(g, model.params, dropout(g, h), batch.statics), batch.labels, weights);
        model.params.zero_grad();
        g.backward(loss);
        num::adam_step(model.params, opt);
        loss_sum += loss.value().item();
      }
      const Tensor probs = predict_view(model, val_view);
      consider(stage, epoch, loss_sum / static_cast<double>(bs.size()),
               selection_metric(probs, val_view.labels, model.n_classes));
    }
  }
};

}  // namespace

TrainResult train_classifier(const num::ParameterSet* pretrained, const enc::EncoderConfig& enc,
                             const ingest::TrainSplit& train,
                             const ingest::ValidationSplit& validation, const TrainPlan& plan,
                             std::uint64_t seed, const ingest::NormStats* stats) {
  enc.validate();
  if (plan.mode != Mode::scratch && pretrained == nullptr) {
    throw ConfigError("train_classifier: mode " + to_string(plan.mode) +
                      " needs pre-trained encoder weights");
  }
  if (train.data.n_vars() != enc.n_vars) {
    throw DimensionError("train_classifier: data has " + std::to_string(train.data.n_vars()) +
                         " variables, encoder expects " + std::to_string(enc.n_vars));
  }
  if (plan.stage2.batch_size == 0 || plan.stage3.batch_size == 0) {
    throw ConfigError("train_classifier: batch size must be > 0");
  }

  TrainResult out;
  Model& model = out.model;
  model.encoder = enc;
  model.n_classes = train.data.n_classes;
  model.n_static = train.data.n_static;
  model.stats = stats ? *stats : ingest::compute_stats(train, enc.per_position_mean);

  ingest::TrainSplit fit = train;
  if (plan.imbalance.resample) {
    num::Rng rs(num::derive_seed(seed, {4}));
    fit = ingest::resample(train, *plan.imbalance.resample, rs);
  }
  out.train_counts = fit.data.class_counts();
  out.weights = plan.imbalance.class_weights ? class_weights(out.train_counts)
                                             : std::vector<double>(model.n_classes, 1.0);

  num::Rng init_rng(num::derive_seed(seed, {0}));
  if (plan.mode == Mode::scratch) {
    model.params = enc::init_encoder(enc, init_rng);
  } else {
    model.params = enc::init_encoder(enc, init_rng);
    for (const auto& name : model.params.names()) {
      if (!pretrained->contains(name)) {
        throw ConfigError("train_classifier: pre-trained weights lack '" + name + "'");
      }
      if (pretrained->at(name).value.shape() != model.params.at(name).value.shape()) {
        throw ConfigError("train_classifier: pre-trained '" + name + "' has shape " +
                          num::shape_string(pretrained->at(name).value.shape()));
      }
    }
    model.params.assign_from(*pretrained);
  }
  num::Rng head_rng(num::derive_seed(seed, {3}));
  model.params.merge(init_head(enc.hidden + model.n_static, model.n_classes, head_rng));

  const enc::InputView train_view = make_view(model, fit.data);
  const enc::InputView val_view = make_view(model, validation.data);

  Trainer t(model, train_view, val_view, out.weights, seed);
  switch (plan.mode) {
    case Mode::scratch:
      t.run_end_to_end(plan.stage2, 2);
      break;
    case Mode::frozen:
      t.run_frozen(plan.stage2, 2);
      break;
    case Mode::fine_tuned:
      t.run_frozen(plan.stage2, 2);
      if (t.best.epoch > 0) model.params = t.best_params;
      t.run_end_to_end(plan.stage3, 3);
      break;
  }
  if (t.best.epoch > 0) model.params = std::move(t.best_params);
  model.params.set_requires_grad("encoder.", true);
  out.history = std::move(t.history);
  out.selection = t.best;
  return out;
}

}  // namespace sparseseq::classify
