// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/numcore/params.hpp"

#include <fstream>
#include <memory>
#include <sstream>

#include "sparseseq/errors.hpp"

namespace sparseseq::num {

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) {
    grad = Tensor(value.shape());
  } else {
    grad.fill(0.0);
  }
}

ParameterSet::ParameterSet(const ParameterSet& other) { *this = other; }

ParameterSet& ParameterSet::operator=(const ParameterSet& other) {
  if (this == &other) return *this;
  items_.clear();
  index_ = other.index_;
  items_.reserve(other.items_.size());
  for (const auto& p : other.items_) items_.push_back(std::make_unique<Parameter>(*p));
  return *this;
}

Parameter& ParameterSet::add(const std::string& name, Tensor value, bool requires_grad) {
  if (contains(name)) throw ConfigError("ParameterSet: duplicate parameter '" + name + "'");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = std::move(value);
  p->requires_grad = requires_grad;
  p->value.requires_grad = requires_grad;
  index_[name] = items_.size();
  items_.push_back(std::move(p));
  return *items_.back();
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("ParameterSet: no parameter named '" + name + "'");
  return *items_[it->second];
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("ParameterSet: no parameter named '" + name + "'");
  return *items_[it->second];
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p->name);
  return out;
}

std::size_t ParameterSet::assign_from(const ParameterSet& other) {
  std::size_t copied = 0;
  for (const auto& src : other.items_) {
    if (!contains(src->name)) continue;
    Parameter& dst = at(src->name);
    if (dst.value.shape() != src->value.shape()) {
      throw DimensionError("ParameterSet::assign_from: '" + src->name + "' has shape " +
                           shape_string(src->value.shape()) + ", expected " +
                           shape_string(dst.value.shape()));
    }
    const bool rg = dst.value.requires_grad;
    dst.value = src->value;
    dst.value.requires_grad = rg;
    ++copied;
  }
  return copied;
}

void ParameterSet::merge(const ParameterSet& other) {
  for (const auto& src : other.items_) {
    if (contains(src->name)) {
      at(src->name) = *src;
    } else {
      add(src->name, src->value, src->requires_grad);
    }
  }
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) p->zero_grad();
}

void ParameterSet::set_requires_grad(const std::string& prefix, bool flag) {
  for (auto& p : items_) {
    if (p->name.rfind(prefix, 0) == 0) {
      p->requires_grad = flag;
      p->value.requires_grad = flag;
    }
  }
}

std::size_t ParameterSet::numel() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p->value.size();
  return n;
}

nlohmann::ordered_json ParameterSet::to_json() const {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& p : items_) {
    nlohmann::ordered_json entry;
    entry["shape"] = p->value.shape();
    entry["data"] = std::vector<double>(p->value.data().begin(), p->value.data().end());
    doc[p->name] = std::move(entry);
  }
  return doc;
}

ParameterSet ParameterSet::from_json(const nlohmann::ordered_json& doc) {
  if (!doc.is_object()) throw ParseError("parameter document must be a JSON object");
  ParameterSet set;
  for (const auto& [name, entry] : doc.items()) {
    if (!entry.is_object() || !entry.contains("shape") || !entry.contains("data")) {
      throw ParseError("parameter '" + name + "' needs 'shape' and 'data'");
    }
    auto shape = entry.at("shape").get<Shape>();
    auto data = entry.at("data").get<std::vector<double>>();
    try {
      set.add(name, Tensor(std::move(shape), std::move(data)));
    } catch (const DimensionError& e) {
      throw ParseError("parameter '" + name + "': " + e.what());
    }
  }
  return set;
}

void ParameterSet::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  // nlohmann::json prints doubles with max_digits10 (17) significant digits.
  out << to_json().dump() << '\n';
}

ParameterSet ParameterSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  nlohmann::ordered_json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return from_json(doc);
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  if (a.items_.size() != b.items_.size()) return false;
  for (std::size_t i = 0; i < a.items_.size(); ++i) {
    if (a.items_[i]->name != b.items_[i]->name) return false;
    if (!(a.items_[i]->value == b.items_[i]->value)) return false;
  }
  return true;
}

}  // namespace sparseseq::num
