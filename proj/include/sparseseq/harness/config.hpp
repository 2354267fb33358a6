// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparseseq/apc/apc.hpp"
#include "sparseseq/classify/classifier.hpp"

namespace sparseseq::harness {

/// Hyperparameters of one model row. JSON keys follow the hyperparameter
/// table: learning_rate, batch_size, hidden_units, dropout,
/// recurrent_dropout, epochs, and for APC models learning_rate_step1,
/// learning_rate_step2_3, epochs_step1, epochs_step2_3.
struct ModelSpec {
  std::string name;
  enc::Family family = enc::Family::gru;
  enc::Scheme scheme = enc::Scheme::flags;
  bool apc = false;
  std::size_t hidden_units = 64;
  std::size_t batch_size = 32;
  double dropout = 0.0;
  double recurrent_dropout = 0.0;
  bool per_position_mean = false;

  // scratch models
  double learning_rate = 1e-3;
  std::size_t epochs = 150;

  // APC models: step 1 pre-trains, steps 2 and 3 classify
  double learning_rate_step1 = 1e-3;
  double learning_rate_step2_3 = 1e-4;
  std::size_t epochs_step1 = 100;
  std::size_t epochs_step2_3 = 100;
  std::size_t shift = 1;
  apc::Loss loss = apc::Loss::masked_mse;
  classify::Mode mode = classify::Mode::fine_tuned;

  std::string imbalance = "none";

  enc::EncoderConfig encoder(std::size_t n_vars) const;
  apc::ApcConfig apc_config() const;
  classify::TrainPlan plan() const;

  nlohmann::ordered_json to_json() const;
  /// Fields absent from `j` keep the values of `base`.
  static ModelSpec from_json(const nlohmann::ordered_json& j, ModelSpec base);
};

struct ExperimentConfig {
  std::string preset;
  std::map<std::string, ModelSpec> models;

  const ModelSpec& model(const std::string& name) const;

  /// "paper": the published synthetic-data settings. "desk": the same
  /// models shrunk to fit one CPU core (see README).
  static ExperimentConfig preset_named(const std::string& name);
  nlohmann::ordered_json to_json() const;
  /// {"preset": name, "models": {NAME: {overrides}}}; unknown models need "encoder".
  static ExperimentConfig from_json(const nlohmann::ordered_json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// "a:b" -> {a, b}; both parts > 0.
std::pair<double, double> parse_ratio(const std::string& text);
std::string format_ratio(double a, double b);

/// FNV-1a, for turning names into seed path components.
std::uint64_t name_hash(const std::string& s);

}  // namespace sparseseq::harness
