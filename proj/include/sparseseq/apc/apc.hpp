// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparseseq/encoders/gru.hpp"
#include "sparseseq/ingest/preprocess.hpp"

// Autoregressive predictive coding: y_t = W h_t is trained to match x_{t+n}.
// n = 0 turns the objective into an autoencoder.

namespace sparseseq::apc {

enum class Loss { masked_mse, l1 };

Loss parse_loss(const std::string& name);
std::string to_string(Loss l);

struct ApcConfig {
  std::size_t shift = 1;
  Loss loss = Loss::masked_mse;
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;

  nlohmann::ordered_json to_json() const;
  static ApcConfig from_json(const nlohmann::ordered_json& j);
};

/// "apc.W", hidden x n_vars, Glorot-uniform.
num::ParameterSet init_projection(std::size_t hidden, std::size_t n_vars, num::Rng& rng);

/// Predictions y_t = h_t W for t = 0 .. T-1-shift. Throws ConfigError when
/// shift >= T.
std::vector<num::Var> apc_forward(const std::vector<num::Var>& states, num::Var W,
                                  std::size_t shift);

/// sum (x_{t+n} - y_t)^2 m_{t+n} / sum m_{t+n}, one denominator over batch,
/// time and variables. targets[t] / masks[t] pair with preds[t]. Masked
/// entries are skipped entirely. Throws NoObservedTargets when sum m = 0.
num::Var masked_mse(std::span<const num::Var> preds, std::span<const num::Tensor> targets,
                    std::span<const num::Tensor> masks);

/// sum |x_{t+n} - y_t| over every entry where `valid` is nonzero (all
/// entries when `valid` is empty). Subgradient 0 at a zero difference.
num::Var l1_loss(std::span<const num::Var> preds, std::span<const num::Tensor> targets,
                 std::span<const num::Tensor> valid = {});

/// Loss of one batch. Raw observed values are the MaskedMSE targets; the
/// scheme's value channel is the L1 target.
num::Var apc_batch_loss(num::Graph& g, num::ParameterSet& params, const enc::EncoderConfig& enc,
                        const ApcConfig& cfg, const enc::Batch& batch,
                        const enc::EncodeOptions& opts = {});

struct PretrainResult {
  num::ParameterSet params;  // encoder.* and apc.W
  std::vector<double> loss_curve;
  ingest::NormStats stats;   // raw-unit statistics of the training split
};

/// Adam on the APC loss for cfg.epochs epochs, no early stopping.
PretrainResult pretrain(const enc::EncoderConfig& enc, const ingest::TrainSplit& train,
                        const ApcConfig& cfg, std::uint64_t seed);

}  // namespace sparseseq::apc
