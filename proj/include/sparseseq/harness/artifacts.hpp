// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "sparseseq/apc/apc.hpp"
#include "sparseseq/harness/config.hpp"

namespace sparseseq::harness {

/// Pre-trained encoder file: {"kind":"sparseseq-encoder","version":1,
/// "encoder":{...},"apc":{...},"stats":{...},"parameters":{...},"loss_curve":[...]}.
struct EncoderArtifact {
  enc::EncoderConfig encoder;
  apc::ApcConfig apc;
  apc::PretrainResult result;

  nlohmann::ordered_json to_json() const;
  static EncoderArtifact from_json(const nlohmann::ordered_json& j);
  void save(const std::filesystem::path& path) const;
  static EncoderArtifact load(const std::filesystem::path& path);
};

/// Reads one model's hyperparameters. The file is either an experiment config
/// ({"preset", "models"}), from which `name` is taken, or a bare model object
/// applied on top of `name` in the desk preset.
ModelSpec load_model_spec(const std::filesystem::path& path, const std::string& name);

}  // namespace sparseseq::harness
