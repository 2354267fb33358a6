// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/harness/artifacts.hpp"

#include <fstream>

#include "sparseseq/errors.hpp"

namespace sparseseq::harness {

using json = nlohmann::ordered_json;

json EncoderArtifact::to_json() const {
  return {{"kind", "sparseseq-encoder"},
          {"version", 1},
          {"encoder", encoder.to_json()},
          {"apc", apc.to_json()},
          {"stats", classify::stats_to_json(result.stats)},
          {"parameters", result.params.to_json()},
          {"loss_curve", result.loss_curve}};
}

EncoderArtifact EncoderArtifact::from_json(const json& j) {
  if (j.value("kind", std::string()) != "sparseseq-encoder") {
    throw ParseError("not a sparseseq-encoder file");
  }
  if (j.value("version", 0) != 1) throw ParseError("unsupported encoder file version");
  try {
    EncoderArtifact a;
    a.encoder = enc::EncoderConfig::from_json(j.at("encoder"));
    a.apc = apc::ApcConfig::from_json(j.at("apc"));
    a.result.stats = classify::stats_from_json(j.at("stats"));
    a.result.params = num::ParameterSet::from_json(j.at("parameters"));
    a.result.loss_curve = j.value("loss_curve", std::vector<double>{});
    return a;
  } catch (const json::exception& e) {
    throw ParseError(std::string("encoder file: ") + e.what());
  }
}

void EncoderArtifact::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

EncoderArtifact EncoderArtifact::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

ModelSpec load_model_spec(const std::filesystem::path& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (j.contains("models") || j.contains("preset")) return ExperimentConfig::from_json(j).model(name);
  return ModelSpec::from_json(j, ExperimentConfig::preset_named("desk").model(name));
}

}  // namespace sparseseq::harness
