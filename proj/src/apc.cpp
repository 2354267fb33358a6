// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/apc/apc.hpp"

#include <algorithm>
#include <numeric>

#include "sparseseq/errors.hpp"
#include "sparseseq/numcore/optim.hpp"

namespace sparseseq::apc {

using num::Graph;
using num::Tensor;
using num::Var;

Loss parse_loss(const std::string& name) {
  if (name == "masked-mse" || name == "masked_mse") return Loss::masked_mse;
  if (name == "l1") return Loss::l1;
  throw ConfigError("unknown APC loss '" + name + "' (masked-mse|l1)");
}

std::string to_string(Loss l) { return l == Loss::masked_mse ? "masked-mse" : "l1"; }

nlohmann::ordered_json ApcConfig::to_json() const {
  return {{"shift", shift},
          {"loss", to_string(loss)},
          {"learning_rate", learning_rate},
          {"epochs", epochs},
          {"batch_size", batch_size}};
}

ApcConfig ApcConfig::from_json(const nlohmann::ordered_json& j) {
  ApcConfig c;
  c.shift = j.value("shift", c.shift);
  c.loss = parse_loss(j.value("loss", to_string(c.loss)));
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  return c;
}

num::ParameterSet init_projection(std::size_t hidden, std::size_t n_vars, num::Rng& rng) {
  num::ParameterSet ps;
  ps.add("apc.W", num::glorot_uniform(hidden, n_vars, hidden, n_vars, rng));
  return ps;
}

std::vector<Var> apc_forward(const std::vector<Var>& states, Var W, std::size_t shift) {
  if (shift >= states.size()) {
    throw ConfigError("apc: time shift " + std::to_string(shift) + " needs sequences longer than " +
                      std::to_string(states.size()) + " steps");
  }
  std::vector<Var> preds;
  preds.reserve(states.size() - shift);
  for (std::size_t t = 0; t + shift < states.size(); ++t) preds.push_back(num::matmul(states[t], W));
  return preds;
}

Var masked_mse(std::span<const Var> preds, std::span<const Tensor> targets,
               std::span<const Tensor> masks) {
  if (preds.size() != targets.size() || preds.size() != masks.size()) {
    throw DimensionError("masked_mse: " + std::to_string(preds.size()) + " predictions, " +
                         std::to_string(targets.size()) + " targets, " +
                         std::to_string(masks.size()) + " masks");
  }
  double count = 0.0;
  for (const Tensor& m : masks)
    for (double v : m.data()) count += v != 0.0 ? 1.0 : 0.0;
  if (count == 0.0) throw NoObservedTargets("masked_mse: no observed target in the window");

  Graph& g = preds.front().graph();
  Var total;
  for (std::size_t t = 0; t < preds.size(); ++t) {
    Var err = num::masked_sum(num::square(preds[t] - g.constant(targets[t])), masks[t]);
    total = total.valid() ? total + err : err;
  }
  return num::scale(total, 1.0 / count);
}

Var l1_loss(std::span<const Var> preds, std::span<const Tensor> targets,
            std::span<const Tensor> valid) {
  if (preds.size() != targets.size() || (!valid.empty() && valid.size() != preds.size())) {
    throw DimensionError("l1_loss: predictions and targets differ in length");
  }
  if (preds.empty()) throw ConfigError("l1_loss: empty prediction window");
  Graph& g = preds.front().graph();
  Var total;
  for (std::size_t t = 0; t < preds.size(); ++t) {
    Var diff = num::abs(preds[t] - g.constant(targets[t]));
    Var err = valid.empty() ? num::sum(diff) : num::masked_sum(diff, valid[t]);
    total = total.valid() ? total + err : err;
  }
  return total;
}

Var apc_batch_loss(Graph& g, num::ParameterSet& params, const enc::EncoderConfig& enc,
                   const ApcConfig& cfg, const enc::Batch& batch, const enc::EncodeOptions& opts) {
  enc::EncodeOptions o = opts;
  o.keep_states = true;
  const enc::GruVars w = enc::bind_encoder(g, params, enc);
  const enc::Encoded e = enc::encode(g, w, enc, batch, o);
  const std::vector<Var> preds = apc_forward(e.states, g.param(params.at("apc.W")), cfg.shift);

  // prediction t pairs with step t + shift, present only where that step exists
  std::vector<Tensor> targets, masks;
  targets.reserve(preds.size());
  masks.reserve(preds.size());
  for (std::size_t t = 0; t < preds.size(); ++t) {
    const std::size_t s = t + cfg.shift;
    if (cfg.loss == Loss::masked_mse) {
      targets.push_back(batch.values[s]);
      masks.push_back(batch.mask[s]);
    } else {
      targets.push_back(batch.fill[s]);
      Tensor valid(batch.fill[s].shape());
      for (std::size_t r = 0; r < batch.size; ++r)
        if (s < batch.lengths[r])
          for (std::size_t k = 0; k < batch.n_vars; ++k) valid(r, k) = 1.0;
      masks.push_back(std::move(valid));
    }
  }
  if (cfg.loss == Loss::masked_mse) return masked_mse(preds, targets, masks);
  return l1_loss(preds, targets, masks);
}

PretrainResult pretrain(const enc::EncoderConfig& enc, const ingest::TrainSplit& train,
                        const ApcConfig& cfg, std::uint64_t seed) {
  enc.validate();
  if (cfg.batch_size == 0) throw ConfigError("pretrain: batch size must be > 0");
  if (train.data.size() == 0) throw ConfigError("pretrain: empty training split");
  for (const auto& s : train.data.samples) {
    if (cfg.shift >= s.length()) {
      throw ConfigError("pretrain: time shift " + std::to_string(cfg.shift) +
                        " is not below the length of sample '" + s.id + "'");
    }
  }

  PretrainResult out;
  out.stats = ingest::compute_stats(train, enc.per_position_mean);
  const enc::InputView view =
      enc::impute_view(ingest::normalize(train.data, out.stats), ingest::normalized_view(out.stats),
                       enc.scheme);

  num::Rng init_rng(num::derive_seed(seed, {0}));
  num::Rng order_rng(num::derive_seed(seed, {1}));
  num::Rng drop_rng(num::derive_seed(seed, {2}));
  out.params = enc::init_encoder(enc, init_rng);
  out.params.merge(init_projection(enc.hidden, enc.n_vars, init_rng));

  num::OptimizerState opt;
  opt.config.learning_rate = cfg.learning_rate;
  std::vector<std::size_t> order(view.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng.engine());
    double loss_sum = 0.0;
    std::size_t used = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::vector<std::size_t> idx(
          order.begin() + start, order.begin() + std::min(order.size(), start + cfg.batch_size));
      const enc::Batch batch = enc::make_batch(view, idx);
      Graph g;
      Var loss;
      try {
        loss = apc_batch_loss(g, out.params, enc, cfg, batch, {true, &drop_rng, true});
      } catch (const NoObservedTargets&) {
        continue;
      }
      out.params.zero_grad();
      g.backward(loss);
      num::adam_step(out.params, opt);
      loss_sum += loss.value().item();
      ++used;
    }
    if (used == 0) {
      throw NoObservedTargets("pretrain: no batch in epoch " + std::to_string(epoch) +
                              " has an observed target; check the missing rate");
    }
    out.loss_curve.push_back(loss_sum / static_cast<double>(used));
  }
  return out;
}

}  // namespace sparseseq::apc
