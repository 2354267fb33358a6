// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/ingest/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "sparseseq/errors.hpp"

namespace sparseseq::ingest {

using nlohmann::json;

std::size_t TimeSeriesDataset::max_length() const {
  std::size_t m = 0;
  for (const auto& s : samples) m = std::max(m, s.length());
  return m;
}

std::vector<std::size_t> TimeSeriesDataset::lengths() const {
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.length());
  return out;
}

std::vector<int> TimeSeriesDataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

std::vector<std::size_t> TimeSeriesDataset::class_counts() const {
  std::vector<std::size_t> counts(n_classes, 0);
  for (const auto& s : samples) {
    if (s.label >= 0 && static_cast<std::size_t>(s.label) < n_classes) ++counts[s.label];
  }
  return counts;
}

double TimeSeriesDataset::observed_fraction() const {
  std::size_t seen = 0, total = 0;
  for (const auto& s : samples) {
    total += s.mask.size();
    seen += static_cast<std::size_t>(std::count(s.mask.begin(), s.mask.end(), 1));
  }
  return total ? static_cast<double>(seen) / static_cast<double>(total) : 0.0;
}

TimeSeriesDataset TimeSeriesDataset::empty_like() const {
  TimeSeriesDataset out;
  out.variable_names = variable_names;
  out.n_static = n_static;
  out.n_classes = n_classes;
  return out;
}

TimeSeriesDataset TimeSeriesDataset::subset(const std::vector<std::size_t>& indices) const {
  TimeSeriesDataset out = empty_like();
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) out.samples.push_back(samples.at(i));
  return out;
}

void TimeSeriesDataset::validate() const {
  const std::size_t d = n_vars();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    const std::string where = "sample " + std::to_string(i) + " ('" + s.id + "')";
    const std::size_t t = s.length();
    if (s.values.size() != t * d || s.mask.size() != t * d) {
      throw ValidationError(where + ": values/mask size does not match length x variables");
    }
    if (s.static_features.size() != n_static) {
      throw ValidationError(where + ": expected " + std::to_string(n_static) + " static features");
    }
    for (std::size_t k = 1; k < t; ++k) {
      if (!(s.times[k] > s.times[k - 1])) {
        throw ValidationError(where + ": times not strictly increasing at step " +
                              std::to_string(k));
      }
    }
    for (std::size_t k = 0; k < t * d; ++k) {
      if (s.mask[k] > 1) throw ValidationError(where + ": mask entries must be 0 or 1");
      if (s.mask[k] && !std::isfinite(s.values[k])) {
        throw ValidationError(where + ": observed entry is not finite");
      }
    }
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= n_classes) {
      throw ValidationError(where + ": label " + std::to_string(s.label) + " outside 0.." +
                            std::to_string(n_classes - 1));
    }
  }
}

Sample make_sample(std::string id, std::vector<double> times, std::vector<double> values,
                   std::size_t n_vars, int label, std::vector<double> static_features) {
  Sample s;
  s.id = std::move(id);
  s.times = std::move(times);
  s.values = std::move(values);
  s.label = label;
  s.static_features = std::move(static_features);
  s.mask.resize(s.values.size());
  for (std::size_t k = 0; k < s.values.size(); ++k) s.mask[k] = std::isfinite(s.values[k]) ? 1 : 0;
  if (s.values.size() != s.times.size() * n_vars) {
    throw ValidationError("make_sample: values size does not match times x variables");
  }
  return s;
}

namespace {

template <typename T>
T field(const json& obj, const char* key, std::size_t line) {
  if (!obj.contains(key)) throw ParseError(std::string("missing field '") + key + "'", line);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("field '") + key + "': " + e.what(), line);
  }
}

Sample parse_record(const json& rec, std::size_t n_vars, std::size_t line) {
  if (!rec.is_object()) throw ParseError("record must be a JSON object", line);
  Sample s;
  s.id = field<std::string>(rec, "id", line);
  s.times = field<std::vector<double>>(rec, "times", line);
  s.label = field<int>(rec, "label", line);
  if (rec.contains("static")) s.static_features = field<std::vector<double>>(rec, "static", line);

  const json& rows = rec.contains("values") ? rec.at("values") : json();
  if (!rows.is_array()) throw ParseError("field 'values' must be an array of rows", line);
  if (rows.size() != s.times.size()) {
    throw ParseError("'values' has " + std::to_string(rows.size()) + " rows but 'times' has " +
                         std::to_string(s.times.size()),
                     line);
  }
  s.values.reserve(s.times.size() * n_vars);
  s.mask.reserve(s.times.size() * n_vars);
  for (const json& row : rows) {
    if (!row.is_array() || row.size() != n_vars) {
      throw ParseError("each 'values' row needs " + std::to_string(n_vars) + " entries", line);
    }
    for (const json& v : row) {
      if (v.is_null()) {
        s.values.push_back(std::numeric_limits<double>::quiet_NaN());
        s.mask.push_back(0);
      } else if (v.is_number()) {
        s.values.push_back(v.get<double>());
        s.mask.push_back(1);
      } else {
        throw ParseError("'values' entries must be numbers or null", line);
      }
    }
  }
  return s;
}

}  // namespace

TimeSeriesDataset parse_dataset(std::istream& in, const std::string& source) {
  TimeSeriesDataset ds;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(source + ": " + e.what(), line);
    }
    if (!have_header) {
      if (!obj.is_object()) throw ParseError(source + ": header must be a JSON object", line);
      const int version = field<int>(obj, "version", line);
      if (version != 1) throw ParseError(source + ": unsupported version " + std::to_string(version), line);
      ds.variable_names = field<std::vector<std::string>>(obj, "variables", line);
      ds.n_static = field<std::size_t>(obj, "n_static", line);
      ds.n_classes = field<std::size_t>(obj, "n_classes", line);
      have_header = true;
      continue;
    }
    ds.samples.push_back(parse_record(obj, ds.n_vars(), line));
    try {
      TimeSeriesDataset one = ds.empty_like();
      one.samples.push_back(ds.samples.back());
      one.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(source + " line " + std::to_string(line) + ": " + e.what());
    }
  }
  if (!have_header) throw ParseError(source + ": missing header line", line == 0 ? 1 : line);
  return ds;
}

TimeSeriesDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read dataset " + path.string());
  return parse_dataset(in, path.string());
}

void write_dataset(const TimeSeriesDataset& dataset, std::ostream& out) {
  json header = {{"version", 1},
                 {"variables", dataset.variable_names},
                 {"n_static", dataset.n_static},
                 {"n_classes", dataset.n_classes}};
  out << header.dump() << '\n';
  const std::size_t d = dataset.n_vars();
  for (const Sample& s : dataset.samples) {
    json rows = json::array();
    for (std::size_t t = 0; t < s.length(); ++t) {
      json row = json::array();
      for (std::size_t k = 0; k < d; ++k) {
        if (s.observed(t, k, d)) {
          row.push_back(s.value(t, k, d));
        } else {
          row.push_back(nullptr);
        }
      }
      rows.push_back(std::move(row));
    }
    json rec;
    rec["id"] = s.id;
    rec["times"] = s.times;
    rec["values"] = std::move(rows);
    rec["static"] = s.static_features;
    rec["label"] = s.label;
    out << rec.dump() << '\n';
  }
}

void save_dataset(const TimeSeriesDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset " + path.string());
  write_dataset(dataset, out);
}

}  // namespace sparseseq::ingest
