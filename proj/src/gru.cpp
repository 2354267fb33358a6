// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/encoders/gru.hpp"

#include <cmath>

#include "sparseseq/errors.hpp"

namespace sparseseq::enc {

using num::Graph;
using num::Tensor;
using num::Var;

Family parse_family(const std::string& name) {
  if (name == "gru") return Family::gru;
  if (name == "gru-d" || name == "grud") return Family::grud;
  throw ConfigError("unknown encoder '" + name + "' (gru|gru-d)");
}

std::string to_string(Family f) { return f == Family::gru ? "gru" : "gru-d"; }

void EncoderConfig::validate() const {
  if (n_vars == 0 || hidden == 0) throw ConfigError("encoder: n_vars and hidden must be > 0");
  if ((family == Family::grud) != (scheme == Scheme::grud)) {
    throw ConfigError("encoder: gru-d requires the grud scheme and the grud scheme requires gru-d");
  }
  for (double p : {dropout, recurrent_dropout}) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("encoder: dropout rates must lie in [0, 1)");
  }
}

nlohmann::ordered_json EncoderConfig::to_json() const {
  return {{"family", to_string(family)},         {"scheme", to_string(scheme)},
          {"n_vars", n_vars},                    {"hidden", hidden},
          {"dropout", dropout},                  {"recurrent_dropout", recurrent_dropout},
          {"per_position_mean", per_position_mean}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::ordered_json& j) {
  EncoderConfig c;
  c.family = parse_family(j.at("family").get<std::string>());
  c.scheme = parse_scheme(j.at("scheme").get<std::string>());
  c.n_vars = j.at("n_vars").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.dropout = j.value("dropout", 0.0);
  c.recurrent_dropout = j.value("recurrent_dropout", 0.0);
  c.per_position_mean = j.value("per_position_mean", false);
  c.validate();
  return c;
}

namespace {

/// Gate blocks side by side, each Glorot-initialized for its own fan-out.
Tensor gate_blocks(std::size_t rows, std::size_t h, std::size_t gates, num::Rng& rng) {
  Tensor out({rows, gates * h});
  for (std::size_t g = 0; g < gates; ++g) {
    const Tensor block = num::glorot_uniform(rows, h, rows, h, rng);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < h; ++c) out(r, g * h + c) = block(r, c);
  }
  return out;
}

}  // namespace

num::ParameterSet init_encoder(const EncoderConfig& cfg, num::Rng& rng) {
  cfg.validate();
  const std::size_t in = cfg.input_width(), h = cfg.hidden, d = cfg.n_vars;
  num::ParameterSet ps;
  ps.add("encoder.W", gate_blocks(in, h, 3, rng));
  ps.add("encoder.U_zr", gate_blocks(h, h, 2, rng));
  ps.add("encoder.U_h", gate_blocks(h, h, 1, rng));
  ps.add("encoder.b", Tensor({1, 3 * h}));
  if (cfg.family == Family::grud) {
    ps.add("encoder.gamma_x_w", num::glorot_uniform(1, d, d, d, rng));
    ps.add("encoder.gamma_x_b", Tensor({1, d}));
    ps.add("encoder.gamma_h_w", num::glorot_uniform(d, h, d, h, rng));
    ps.add("encoder.gamma_h_b", Tensor({1, h}));
  }
  return ps;
}

GruVars bind_encoder(Graph& g, num::ParameterSet& params, const EncoderConfig& cfg) {
  GruVars w;
  w.W = g.param(params.at("encoder.W"));
  w.U_zr = g.param(params.at("encoder.U_zr"));
  w.U_h = g.param(params.at("encoder.U_h"));
  w.b = g.param(params.at("encoder.b"));
  if (cfg.family == Family::grud) {
    w.gx_w = g.param(params.at("encoder.gamma_x_w"));
    w.gx_b = g.param(params.at("encoder.gamma_x_b"));
    w.gh_w = g.param(params.at("encoder.gamma_h_w"));
    w.gh_b = g.param(params.at("encoder.gamma_h_b"));
  }
  return w;
}

Var gru_step(Var h_prev, Var x, const GruVars& w, const Tensor* rec_mask) {
  Graph& g = h_prev.graph();
  const std::size_t h = w.U_h.rows();
  if (h_prev.cols() != h) {
    throw DimensionError("gru_step: state width " + std::to_string(h_prev.cols()) +
                         " vs hidden " + std::to_string(h));
  }
  Var h_in = rec_mask ? num::mul(h_prev, g.constant(*rec_mask)) : h_prev;
  Var xw = num::matmul(x, w.W) + w.b;
  Var zr = num::sigmoid(num::slice_cols(xw, 0, 2 * h) + num::matmul(h_in, w.U_zr));
  Var z = num::slice_cols(zr, 0, h);
  Var r = num::slice_cols(zr, h, 2 * h);
  Var cand = num::tanh(num::slice_cols(xw, 2 * h, 3 * h) + num::matmul(r * h_in, w.U_h));
  return h_prev + z * (cand - h_prev);
}

GruDStep gru_d_step(Var h_prev, const Tensor& x, const Tensor& m, const Tensor& delta,
                    const Tensor& x_last, const Tensor& x_tilde, const GruVars& w,
                    const Tensor* rec_mask) {
  Graph& g = h_prev.graph();
  const std::size_t n = x.size();
  for (const Tensor* t : {&m, &delta, &x_last, &x_tilde}) {
    if (!t->same_shape(x)) {
      throw DimensionError("gru_d_step: input " + num::shape_string(t->shape()) + " vs x " +
                           num::shape_string(x.shape()));
    }
  }
  // x^ = m x + last * gx + mean * (1 - gx), last = (1 - m) x_last, mean = (1 - m) x~
  Tensor observed(x.shape()), last(x.shape()), mean(x.shape()), x_last_next = x_last;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(delta[i] >= 0.0)) throw ContractError("gru_d_step: negative time gap");
    if (m[i] != 0.0) {
      observed[i] = x[i];
      x_last_next[i] = x[i];
    } else {
      last[i] = x_last[i];
      mean[i] = x_tilde[i];
    }
  }
  Var d = g.constant(delta);
  Var gx = num::exp(num::scale(num::relu(num::mul(d, w.gx_w) + w.gx_b), -1.0));
  Var x_hat = g.constant(std::move(observed)) + num::mul(g.constant(std::move(last)), gx) +
              num::mul(g.constant(std::move(mean)), num::one_minus(gx));
  Var gh = num::exp(num::scale(num::relu(num::matmul(d, w.gh_w) + w.gh_b), -1.0));
  Var h_dec = gh * h_prev;
  Var h = gru_step(h_dec, num::concat_cols({x_hat, g.constant(m)}), w, rec_mask);
  return {h, std::move(x_last_next), x_hat};
}

Tensor dropout_mask(std::size_t rows, std::size_t cols, double rate, num::Rng& rng) {
  Tensor mask({rows, cols});
  const double keep = 1.0 - rate;
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return mask;
}

Encoded encode(Graph& g, const GruVars& w, const EncoderConfig& cfg, const Batch& batch,
               const EncodeOptions& opts) {
  const std::size_t bs = batch.size, h = cfg.hidden;
  const bool grud = cfg.family == Family::grud;
  if (!grud && !batch.input.empty() && batch.input[0].cols() != cfg.input_width()) {
    throw DimensionError("encode: batch width " + std::to_string(batch.input[0].cols()) +
                         " vs encoder input " + std::to_string(cfg.input_width()));
  }

  Tensor rec_mask;
  const Tensor* rec = nullptr;
  if (opts.training && cfg.recurrent_dropout > 0.0) {
    if (!opts.rng) throw ContractError("encode: recurrent dropout needs an rng");
    rec_mask = dropout_mask(bs, h, cfg.recurrent_dropout, *opts.rng);
    rec = &rec_mask;
  }

  Encoded out;
  Var state = g.constant(Tensor({bs, h}));
  for (std::size_t t = 0; t < batch.steps; ++t) {
    Var next;
    if (grud) {
      // x_last per step comes precomputed from the view
      next = gru_d_step(state, batch.values[t], batch.mask[t], batch.delta[t], batch.x_last[t],
                        batch.x_tilde[t], w, rec)
                 .h;
    } else {
      next = gru_step(state, g.constant(batch.input[t]), w, rec);
    }
    if (batch.ragged) {
      Tensor alive({bs, h});
      for (std::size_t r = 0; r < bs; ++r)
        if (t < batch.lengths[r])
          for (std::size_t c = 0; c < h; ++c) alive(r, c) = 1.0;
      next = state + num::mul(g.constant(std::move(alive)), next - state);
    }
    state = next;
    if (opts.keep_states) out.states.push_back(state);
  }
  out.final = state;
  return out;
}

}  // namespace sparseseq::enc
