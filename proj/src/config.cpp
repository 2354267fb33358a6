// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/harness/config.hpp"

#include <cstdio>
#include <fstream>

#include "sparseseq/errors.hpp"

namespace sparseseq::harness {

using json = nlohmann::ordered_json;

enc::EncoderConfig ModelSpec::encoder(std::size_t n_vars) const {
  enc::EncoderConfig c;
  c.family = family;
  c.scheme = scheme;
  c.n_vars = n_vars;
  c.hidden = hidden_units;
  c.dropout = dropout;
  c.recurrent_dropout = recurrent_dropout;
  c.per_position_mean = per_position_mean;
  c.validate();
  return c;
}

apc::ApcConfig ModelSpec::apc_config() const {
  apc::ApcConfig c;
  c.shift = shift;
  c.loss = loss;
  c.learning_rate = learning_rate_step1;
  c.epochs = epochs_step1;
  c.batch_size = batch_size;
  return c;
}

classify::TrainPlan ModelSpec::plan() const {
  classify::TrainPlan p;
  p.imbalance = classify::Imbalance::parse(imbalance);
  if (!apc) {
    p.mode = classify::Mode::scratch;
    p.stage2 = {learning_rate, epochs, batch_size};
    return p;
  }
  p.mode = mode;
  p.stage2 = {learning_rate_step2_3, epochs_step2_3, batch_size};
  p.stage3 = {learning_rate_step2_3, epochs_step2_3, batch_size};
  return p;
}

json ModelSpec::to_json() const {
  json j = {{"encoder", enc::to_string(family)},
            {"scheme", enc::to_string(scheme)},
            {"apc", apc},
            {"hidden_units", hidden_units},
            {"batch_size", batch_size},
            {"dropout", dropout},
            {"recurrent_dropout", recurrent_dropout},
            {"per_position_mean", per_position_mean},
            {"imbalance", imbalance}};
  if (apc) {
    j["learning_rate_step1"] = learning_rate_step1;
    j["learning_rate_step2_3"] = learning_rate_step2_3;
    j["epochs_step1"] = epochs_step1;
    j["epochs_step2_3"] = epochs_step2_3;
    j["shift"] = shift;
    j["loss"] = apc::to_string(loss);
    j["mode"] = classify::to_string(mode);
  } else {
    j["learning_rate"] = learning_rate;
    j["epochs"] = epochs;
  }
  return j;
}

ModelSpec ModelSpec::from_json(const json& j, ModelSpec m) {
  if (!j.is_object()) throw ConfigError("model '" + m.name + "': expected a JSON object");
  try {
    if (j.contains("encoder")) m.family = enc::parse_family(j["encoder"].get<std::string>());
    if (j.contains("scheme")) {
      m.scheme = enc::parse_scheme(j["scheme"].get<std::string>());
    } else if (j.contains("encoder")) {
      m.scheme = m.family == enc::Family::grud ? enc::Scheme::grud : enc::Scheme::flags;
    }
    m.apc = j.value("apc", m.apc);
    m.hidden_units = j.value("hidden_units", m.hidden_units);
    m.batch_size = j.value("batch_size", m.batch_size);
    m.dropout = j.value("dropout", m.dropout);
    m.recurrent_dropout = j.value("recurrent_dropout", m.recurrent_dropout);
    m.per_position_mean = j.value("per_position_mean", m.per_position_mean);
    m.learning_rate = j.value("learning_rate", m.learning_rate);
    m.epochs = j.value("epochs", m.epochs);
    m.learning_rate_step1 = j.value("learning_rate_step1", m.learning_rate_step1);
    m.learning_rate_step2_3 = j.value("learning_rate_step2_3", m.learning_rate_step2_3);
    m.epochs_step1 = j.value("epochs_step1", m.epochs_step1);
    m.epochs_step2_3 = j.value("epochs_step2_3", m.epochs_step2_3);
    m.shift = j.value("shift", m.shift);
    if (j.contains("loss")) m.loss = apc::parse_loss(j["loss"].get<std::string>());
    if (j.contains("mode")) m.mode = classify::parse_mode(j["mode"].get<std::string>());
    m.imbalance = j.value("imbalance", m.imbalance);
  } catch (const json::exception& e) {
    throw ConfigError("model '" + m.name + "': " + e.what());
  }
  classify::Imbalance::parse(m.imbalance);
  if (m.apc && m.mode == classify::Mode::scratch) {
    throw ConfigError("model '" + m.name + "': APC models train frozen or fine-tuned");
  }
  return m;
}

const ModelSpec& ExperimentConfig::model(const std::string& name) const {
  auto it = models.find(name);
  if (it == models.end()) throw ConfigError("no model named '" + name + "' in the configuration");
  return it->second;
}

ExperimentConfig ExperimentConfig::preset_named(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  ModelSpec gru;
  gru.name = "GRU";
  gru.hidden_units = 64;
  gru.epochs = 150;
  gru.imbalance = "cw";

  ModelSpec grud = gru;
  grud.name = "GRU-D";
  grud.family = enc::Family::grud;
  grud.scheme = enc::Scheme::grud;
  grud.hidden_units = 32;
  grud.epochs = 100;

  ModelSpec gru_apc;
  gru_apc.name = "GRU-APC";
  gru_apc.apc = true;
  gru_apc.hidden_units = 120;
  gru_apc.dropout = 0.0;  // listed as 1.0, which would zero the representation
  gru_apc.epochs_step1 = 100;
  gru_apc.epochs_step2_3 = 100;

  ModelSpec grud_apc = gru_apc;
  grud_apc.name = "GRU-D-APC";
  grud_apc.family = enc::Family::grud;
  grud_apc.scheme = enc::Scheme::grud;
  grud_apc.hidden_units = 250;

  if (name == "desk") {
    for (ModelSpec* m : {&gru, &grud, &gru_apc, &grud_apc}) m->hidden_units = 32;
    gru.epochs = 40;
    grud.epochs = 40;
    for (ModelSpec* m : {&gru_apc, &grud_apc}) {
      m->epochs_step1 = 30;
      m->epochs_step2_3 = 30;
    }
  } else if (name != "paper") {
    throw ConfigError("unknown preset '" + name + "' (paper|desk)");
  }
  for (const ModelSpec& m : {gru, grud, gru_apc, grud_apc}) c.models[m.name] = m;
  return c;
}

json ExperimentConfig::to_json() const {
  json models_j = json::object();
  for (const auto& [name, m] : models) models_j[name] = m.to_json();
  return {{"preset", preset}, {"models", models_j}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c = preset_named(j.value("preset", std::string("paper")));
  if (j.contains("models")) {
    for (const auto& [name, body] : j["models"].items()) {
      auto it = c.models.find(name);
      ModelSpec base;
      base.name = name;
      if (it != c.models.end()) {
        base = it->second;
      } else if (!body.contains("encoder")) {
        throw ConfigError("model '" + name + "' is not a preset model and has no \"encoder\"");
      }
      c.models[name] = ModelSpec::from_json(body, base);
    }
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::pair<double, double> parse_ratio(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("ratio '" + text + "' is not of the form a:b");
  try {
    std::size_t ua = 0, ub = 0;
    const std::string sa = text.substr(0, colon), sb = text.substr(colon + 1);
    const double a = std::stod(sa, &ua), b = std::stod(sb, &ub);
    if (ua != sa.size() || ub != sb.size() || !(a > 0) || !(b > 0)) throw std::invalid_argument(text);
    return {a, b};
  } catch (const std::exception&) {
    throw ConfigError("ratio '" + text + "' needs two positive numbers a:b");
  }
}

std::string format_ratio(double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g:%g", a, b);
  return buf;
}

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sparseseq::harness
