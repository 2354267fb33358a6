// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparseseq/encoders/gru.hpp"
#include "sparseseq/ingest/preprocess.hpp"

namespace sparseseq::classify {

/// w_c = N / (K N_c). Throws ConfigError on an empty class.
std::vector<double> class_weights(const std::vector<std::size_t>& counts);

/// mean over rows of -w[y] log softmax(logits)[y].
num::Var weighted_cross_entropy(num::Var logits, std::span<const int> labels,
                                std::span<const double> weights);

enum class Mode { scratch, frozen, fine_tuned };
Mode parse_mode(const std::string& name);
std::string to_string(Mode m);

/// none | cw | os | us | os-cw | os-cw:<fraction>
struct Imbalance {
  bool class_weights = false;
  std::optional<ingest::ResampleMode> resample;

  static Imbalance parse(const std::string& text);
  std::string to_string() const;
};

struct StageConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
};

/// scratch trains end-to-end with stage2; frozen runs stage 2 (head only);
/// fine_tuned runs stage 2 and then stage 3 end-to-end.
struct TrainPlan {
  Mode mode = Mode::scratch;
  StageConfig stage2;
  StageConfig stage3;
  Imbalance imbalance;
};

struct Model {
  enc::EncoderConfig encoder;
  std::size_t n_classes = 2;
  std::size_t n_static = 0;
  ingest::NormStats stats;  // raw units, from the training split
  num::ParameterSet params;  // encoder.*, head.W, head.b

  nlohmann::ordered_json to_json() const;
  static Model from_json(const nlohmann::ordered_json& j);
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);
};

nlohmann::ordered_json stats_to_json(const ingest::NormStats& s);
ingest::NormStats stats_from_json(const nlohmann::ordered_json& j);

/// head.W [(hidden + n_static) x K] Glorot, head.b zeros.
num::ParameterSet init_head(std::size_t in, std::size_t n_classes, num::Rng& rng);

/// Logits for [features; statics] through the linear head.
num::Var head_logits(num::Graph& g, num::ParameterSet& params, num::Var features,
                     const num::Tensor& statics);

/// Softmax class probabilities [N x K] for raw (unnormalized) data.
num::Tensor predict(const Model& model, const ingest::TimeSeriesDataset& raw);

/// Probabilities for an already built view.
num::Tensor predict_view(const Model& model, const enc::InputView& view);

/// AUPRC of class 1 for K = 2, weighted F1 otherwise.
double selection_metric(const num::Tensor& probs, std::span<const int> labels,
                        std::size_t n_classes);

struct EpochRecord {
  int stage = 0;
  std::size_t epoch = 0;  // 1-based within its stage
  double train_loss = 0.0;
  double val_metric = 0.0;
};

struct Selection {
  int stage = 0;
  std::size_t epoch = 0;
  double metric = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> history;
  Selection selection;
  std::vector<double> weights;             // class weights used in the loss
  std::vector<std::size_t> train_counts;   // after resampling
};

/// Trains a classifier and returns the checkpoint with the best validation
/// metric (earliest epoch on ties, over every stage). `pretrained` must hold
/// encoder.* for frozen and fine_tuned. `stats` defaults to the statistics
/// of `train`.
TrainResult train_classifier(const num::ParameterSet* pretrained, const enc::EncoderConfig& enc,
                             const ingest::TrainSplit& train,
                             const ingest::ValidationSplit& validation, const TrainPlan& plan,
                             std::uint64_t seed, const ingest::NormStats* stats = nullptr);

}  // namespace sparseseq::classify
