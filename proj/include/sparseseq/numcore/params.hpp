// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparseseq/numcore/tensor.hpp"

namespace sparseseq::num {

/// A named trainable tensor and its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // same shape as value once allocated
  bool requires_grad = true;

  void zero_grad();
};

/// Ordered collection of parameters. Insertion order is the iteration order,
/// which keeps optimizer updates and serialization deterministic.
///
/// Parameters are stored behind stable addresses: references returned by
/// add()/at() stay valid for the lifetime of the set.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet& other);
  ParameterSet& operator=(const ParameterSet& other);
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

  Parameter& add(const std::string& name, Tensor value, bool requires_grad = true);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t size() const noexcept { return items_.size(); }
  std::vector<std::string> names() const;

  /// Copy values (not grads) of every parameter in `other` whose name exists here.
  /// Shapes must agree. Returns the number of parameters copied.
  std::size_t assign_from(const ParameterSet& other);

  /// Insert or overwrite every parameter of `other`.
  void merge(const ParameterSet& other);

  void zero_grad();
  void set_requires_grad(const std::string& prefix, bool flag);
  std::size_t numel() const;

  template <typename F>
  void for_each(F&& f) {
    for (auto& p : items_) f(*p);
  }
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& p : items_) f(static_cast<const Parameter&>(*p));
  }

  /// {"name": {"shape": [...], "data": [...]}, ...}; doubles written with 17
  /// significant digits so the round trip is value-exact.
  nlohmann::ordered_json to_json() const;
  static ParameterSet from_json(const nlohmann::ordered_json& doc);

  void save(const std::filesystem::path& path) const;
  static ParameterSet load(const std::filesystem::path& path);

  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::vector<std::unique_ptr<Parameter>> items_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace sparseseq::num
