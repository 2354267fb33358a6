// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "sparseseq/ingest/dataset.hpp"
#include "sparseseq/numcore/rng.hpp"

namespace sparseseq::ingest {

// ---------------------------------------------------------------------------
// Split roles. Statistics, resampling and pre-training accept only TrainSplit,
// so validation and test data cannot reach them by accident.
// ---------------------------------------------------------------------------

enum class SplitRole { train, validation, test };

template <SplitRole Role>
struct Split {
  TimeSeriesDataset data;

  Split() = default;
  explicit Split(TimeSeriesDataset d) : data(std::move(d)) {}
};

using TrainSplit = Split<SplitRole::train>;
using ValidationSplit = Split<SplitRole::validation>;
using TestSplit = Split<SplitRole::test>;

struct Splits {
  TrainSplit train;
  ValidationSplit validation;
  TestSplit test;
  /// Indices into the source dataset, in split order.
  std::vector<std::size_t> train_index, validation_index, test_index;
};

/// Stratified partition. Per class, split sizes come from the largest-remainder
/// rounding of count * fraction; membership is a seeded shuffle.
/// Throws ConfigError when a class has fewer than 3 samples.
Splits split(const TimeSeriesDataset& dataset, std::array<double, 3> fractions,
             std::uint64_t seed);

/// Largest-remainder apportionment of `total` over `weights`; ties go to the
/// earlier entry. Sums to `total` exactly.
std::vector<std::size_t> largest_remainder(std::size_t total, const std::vector<double>& weights);

// ---------------------------------------------------------------------------
// Time grid aggregation
// ---------------------------------------------------------------------------

struct Event {
  double time;  // hours
  std::string variable;
  double value;
};

/// Averages events per (resolution bin, variable). Bin time is the bin start.
/// Only bins holding at least one event become rows; variables without an
/// event in a row are missing. Unknown variable names are ignored.
Sample aggregate(const std::vector<Event>& events, const std::vector<std::string>& variables,
                 double resolution);

/// Bin index of `time` at `resolution`. Times within 1e-9 of a bin's upper
/// boundary belong to the next bin, which absorbs decimal representation error
/// (2.7 / 0.1 is 26.999...).
long long bin_index(double time, double resolution);
/// Start time of a bin; exact decimal when 1/resolution is an integer.
double bin_start(long long index, double resolution);

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

struct NormStats {
  std::vector<double> mean;  // per variable
  std::vector<double> std;   // per variable; 1 where constant
  std::vector<bool> constant;
  /// Optional [max_length x n_vars] means per time position; empty if unused.
  std::vector<double> position_mean;
  std::size_t positions = 0;

  std::size_t n_vars() const noexcept { return mean.size(); }
  bool per_position() const noexcept { return positions > 0; }
  /// Empirical mean for (t, d): per-position when available, else global.
  double empirical_mean(std::size_t t, std::size_t d) const;
};

/// Mean and population std over observed training entries. per_position adds
/// a mean for every (time index, variable), falling back to the variable mean
/// where a position has no observation. Throws ValidationError naming any
/// variable never observed.
NormStats compute_stats(const TrainSplit& train, bool per_position = false);

/// z-scores observed entries; mask and missing entries are untouched.
TimeSeriesDataset normalize(const TimeSeriesDataset& dataset, const NormStats& stats);

/// Per-position means converted into normalized units, for use with
/// normalized data: (position_mean - mean) / std.
NormStats normalized_view(const NormStats& stats);

// ---------------------------------------------------------------------------
// Missingness features
// ---------------------------------------------------------------------------

/// Time since each variable was last observed, [length x n_vars]:
///   delta[0] = 0
///   delta[t] = (times[t] - times[t-1]) + (mask[t-1] ? 0 : delta[t-1])
std::vector<double> compute_deltas(const Sample& sample, std::size_t n_vars);

// ---------------------------------------------------------------------------
// Class resampling (training split only)
// ---------------------------------------------------------------------------

struct Oversample {};
struct Undersample {};
/// Duplicate minority samples until the non-majority classes make up
/// `fraction` of the resampled set.
struct OversampleTo {
  double fraction;
};
using ResampleMode = std::variant<Oversample, Undersample, OversampleTo>;

TrainSplit resample(const TrainSplit& train, const ResampleMode& mode, num::Rng& rng);

/// Index of the most frequent class (lowest index on ties).
std::size_t majority_class(const std::vector<std::size_t>& counts);

}  // namespace sparseseq::ingest
