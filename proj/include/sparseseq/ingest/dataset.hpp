// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sparseseq::ingest {

/// One multivariate series. Values are row-major [length x n_vars]; an
/// unobserved entry holds NaN and has mask 0.
struct Sample {
  std::string id;
  std::vector<double> times;  // hours, strictly increasing
  std::vector<double> values;
  std::vector<std::uint8_t> mask;
  std::vector<double> static_features;
  int label = 0;

  std::size_t length() const noexcept { return times.size(); }
  bool observed(std::size_t t, std::size_t d, std::size_t n_vars) const {
    return mask[t * n_vars + d] != 0;
  }
  double value(std::size_t t, std::size_t d, std::size_t n_vars) const {
    return values[t * n_vars + d];
  }
};

struct TimeSeriesDataset {
  std::vector<std::string> variable_names;
  std::size_t n_static = 0;
  std::size_t n_classes = 2;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  std::size_t n_vars() const noexcept { return variable_names.size(); }
  std::size_t max_length() const;
  std::vector<std::size_t> lengths() const;
  std::vector<int> labels() const;
  std::vector<std::size_t> class_counts() const;
  /// Fraction of (t, d) entries that are observed, over all samples.
  double observed_fraction() const;

  /// Same header (variables, static width, classes), no samples.
  TimeSeriesDataset empty_like() const;
  TimeSeriesDataset subset(const std::vector<std::size_t>& indices) const;

  /// Throws ValidationError on the first broken invariant: shapes, mask/value
  /// consistency, strictly increasing times, labels in range.
  void validate() const;
};

/// Builds a sample from a row-major value grid using NaN as "missing".
Sample make_sample(std::string id, std::vector<double> times, std::vector<double> values,
                   std::size_t n_vars, int label, std::vector<double> static_features = {});

// ---------------------------------------------------------------------------
// Dataset file: UTF-8 JSON Lines.
//   line 1: {"version":1, "variables":[...], "n_static":S, "n_classes":K}
//   then:   {"id":str, "times":[...], "values":[[v|null, ...], ...],
//            "static":[...], "label":int}
// The mask is not stored; null means unobserved.
// ---------------------------------------------------------------------------

TimeSeriesDataset load_dataset(const std::filesystem::path& path);
void save_dataset(const TimeSeriesDataset& dataset, const std::filesystem::path& path);

TimeSeriesDataset parse_dataset(std::istream& in, const std::string& source = "<stream>");
void write_dataset(const TimeSeriesDataset& dataset, std::ostream& out);

}  // namespace sparseseq::ingest
