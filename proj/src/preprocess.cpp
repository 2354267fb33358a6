// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/ingest/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "sparseseq/errors.hpp"

namespace sparseseq::ingest {

// ----------------------------------------------------------------- splitting

std::vector<std::size_t> largest_remainder(std::size_t total, const std::vector<double>& weights) {
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (weights.empty() || !(wsum > 0.0)) throw ConfigError("largest_remainder: weights must sum > 0");
  std::vector<std::size_t> out(weights.size());
  std::vector<double> frac(weights.size());
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    double q = static_cast<double>(total) * weights[k] / wsum;
    if (std::fabs(q - std::round(q)) < 1e-9) q = std::round(q);
    out[k] = static_cast<std::size_t>(std::floor(q));
    frac[k] = q - std::floor(q);
    assigned += out[k];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++out[order[r % order.size()]];
  return out;
}

Splits split(const TimeSeriesDataset& dataset, std::array<double, 3> fractions,
             std::uint64_t seed) {
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split: fractions must be non-negative");
  }
  std::vector<std::vector<std::size_t>> by_class(dataset.n_classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int y = dataset.samples[i].label;
    if (y < 0 || static_cast<std::size_t>(y) >= dataset.n_classes) {
      throw ValidationError("split: label out of range in sample " + std::to_string(i));
    }
    by_class[y].push_back(i);
  }
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].size() < 3) {
      throw ConfigError("split: class " + std::to_string(c) + " has " +
                        std::to_string(by_class[c].size()) + " samples, need at least 3");
    }
  }

  num::Rng rng(seed);
  const std::vector<double> w(fractions.begin(), fractions.end());
  Splits out;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng.engine());
    const auto counts = largest_remainder(members.size(), w);
    auto it = members.begin();
    out.train_index.insert(out.train_index.end(), it, it + counts[0]);
    it += counts[0];
    out.validation_index.insert(out.validation_index.end(), it, it + counts[1]);
    it += counts[1];
    out.test_index.insert(out.test_index.end(), it, it + counts[2]);
  }
  std::sort(out.train_index.begin(), out.train_index.end());
  std::sort(out.validation_index.begin(), out.validation_index.end());
  std::sort(out.test_index.begin(), out.test_index.end());
  out.train = TrainSplit(dataset.subset(out.train_index));
  out.validation = ValidationSplit(dataset.subset(out.validation_index));
  out.test = TestSplit(dataset.subset(out.test_index));
  return out;
}

// --------------------------------------------------------------- aggregation

namespace {

/// 1/resolution, snapped to an integer when it is one (0.1 -> 10).
double inverse_resolution(double resolution) {
  if (!(resolution > 0.0)) throw ConfigError("aggregate: resolution must be > 0");
  const double inv = 1.0 / resolution;
  const double r = std::round(inv);
  return std::fabs(inv - r) < 1e-9 * std::max(1.0, r) ? r : inv;
}

}  // namespace

long long bin_index(double time, double resolution) {
  const double inv = inverse_resolution(resolution);
  return static_cast<long long>(std::floor(time * inv + 1e-9));
}

double bin_start(long long index, double resolution) {
  const double inv = inverse_resolution(resolution);
  if (inv == std::round(inv)) return static_cast<double>(index) / inv;
  return static_cast<double>(index) * resolution;
}

Sample aggregate(const std::vector<Event>& events, const std::vector<std::string>& variables,
                 double resolution) {
  const std::size_t d = variables.size();
  std::map<std::string, std::size_t> column;
  for (std::size_t k = 0; k < d; ++k) column[variables[k]] = k;

  struct Acc {
    std::vector<double> sum;
    std::vector<std::size_t> count;
  };
  std::map<long long, Acc> bins;
  for (const Event& e : events) {
    auto col = column.find(e.variable);
    if (col == column.end() || !std::isfinite(e.value)) continue;
    Acc& acc = bins[bin_index(e.time, resolution)];
    if (acc.sum.empty()) {
      acc.sum.assign(d, 0.0);
      acc.count.assign(d, 0);
    }
    acc.sum[col->second] += e.value;
    ++acc.count[col->second];
  }

  Sample s;
  for (const auto& [idx, acc] : bins) {
    s.times.push_back(bin_start(idx, resolution));
    for (std::size_t k = 0; k < d; ++k) {
      if (acc.count[k] == 0) {
        s.values.push_back(std::numeric_limits<double>::quiet_NaN());
        s.mask.push_back(0);
      } else {
        s.values.push_back(acc.count[k] == 1 ? acc.sum[k]
                                             : acc.sum[k] / static_cast<double>(acc.count[k]));
        s.mask.push_back(1);
      }
    }
  }
  return s;
}

// ------------------------------------------------------------- normalization

double NormStats::empirical_mean(std::size_t t, std::size_t d) const {
  if (per_position() && t < positions) return position_mean[t * n_vars() + d];
  return mean[d];
}

NormStats compute_stats(const TrainSplit& train, bool per_position) {
  const TimeSeriesDataset& ds = train.data;
  const std::size_t d = ds.n_vars();
  std::vector<double> sum(d, 0.0);
  std::vector<std::size_t> count(d, 0);
  for (const Sample& s : ds.samples)
    for (std::size_t t = 0; t < s.length(); ++t)
      for (std::size_t k = 0; k < d; ++k)
        if (s.observed(t, k, d)) {
          sum[k] += s.value(t, k, d);
          ++count[k];
        }

  NormStats st;
  st.mean.resize(d);
  st.std.resize(d);
  st.constant.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    if (count[k] == 0) {
      throw ValidationError("compute_stats: variable '" + ds.variable_names[k] +
                            "' is never observed in the training split");
    }
    st.mean[k] = sum[k] / static_cast<double>(count[k]);
  }

  std::vector<double> sq(d, 0.0);
  for (const Sample& s : ds.samples)
    for (std::size_t t = 0; t < s.length(); ++t)
      for (std::size_t k = 0; k < d; ++k)
        if (s.observed(t, k, d)) {
          const double dev = s.value(t, k, d) - st.mean[k];
          sq[k] += dev * dev;
        }
  for (std::size_t k = 0; k < d; ++k) {
    const double sd = std::sqrt(sq[k] / static_cast<double>(count[k]));
    st.constant[k] = !(sd > 1e-12 * std::max(1.0, std::fabs(st.mean[k])));
    st.std[k] = st.constant[k] ? 1.0 : sd;
  }

  if (per_position) {
    const std::size_t tmax = ds.max_length();
    std::vector<double> psum(tmax * d, 0.0);
    std::vector<std::size_t> pcount(tmax * d, 0);
    for (const Sample& s : ds.samples)
      for (std::size_t t = 0; t < s.length(); ++t)
        for (std::size_t k = 0; k < d; ++k)
          if (s.observed(t, k, d)) {
            psum[t * d + k] += s.value(t, k, d);
            ++pcount[t * d + k];
          }
    st.positions = tmax;
    st.position_mean.resize(tmax * d);
    for (std::size_t i = 0; i < tmax * d; ++i) {
      st.position_mean[i] =
          pcount[i] ? psum[i] / static_cast<double>(pcount[i]) : st.mean[i % d];
    }
  }
  return st;
}

TimeSeriesDataset normalize(const TimeSeriesDataset& dataset, const NormStats& stats) {
  const std::size_t d = dataset.n_vars();
  if (stats.n_vars() != d) {
    throw DimensionError("normalize: stats for " + std::to_string(stats.n_vars()) +
                         " variables, dataset has " + std::to_string(d));
  }
  TimeSeriesDataset out = dataset;
  for (Sample& s : out.samples)
    for (std::size_t i = 0; i < s.values.size(); ++i)
      if (s.mask[i]) s.values[i] = (s.values[i] - stats.mean[i % d]) / stats.std[i % d];
  return out;
}

NormStats normalized_view(const NormStats& stats) {
  NormStats out = stats;
  const std::size_t d = stats.n_vars();
  for (std::size_t k = 0; k < d; ++k) {
    out.mean[k] = 0.0;
    out.std[k] = 1.0;
  }
  for (std::size_t i = 0; i < out.position_mean.size(); ++i) {
    out.position_mean[i] = (stats.position_mean[i] - stats.mean[i % d]) / stats.std[i % d];
  }
  return out;
}

// ------------------------------------------------------------------- deltas

std::vector<double> compute_deltas(const Sample& sample, std::size_t n_vars) {
  const std::size_t len = sample.length();
  std::vector<double> delta(len * n_vars, 0.0);
  for (std::size_t t = 1; t < len; ++t) {
    const double gap = sample.times[t] - sample.times[t - 1];
    for (std::size_t k = 0; k < n_vars; ++k) {
      const double carried = sample.mask[(t - 1) * n_vars + k] ? 0.0 : delta[(t - 1) * n_vars + k];
      delta[t * n_vars + k] = gap + carried;
    }
  }
  return delta;
}

// --------------------------------------------------------------- resampling

std::size_t majority_class(const std::vector<std::size_t>& counts) {
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

TrainSplit resample(const TrainSplit& train, const ResampleMode& mode, num::Rng& rng) {
  const TimeSeriesDataset& ds = train.data;
  std::vector<std::vector<std::size_t>> by_class(ds.n_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class.at(ds.samples[i].label).push_back(i);
  std::vector<std::size_t> counts;
  for (const auto& m : by_class) {
    if (m.empty()) throw ConfigError("resample: every class needs at least one training sample");
    counts.push_back(m.size());
  }
  const std::size_t maj = majority_class(counts);

  std::vector<std::size_t> keep;
  auto duplicate = [&](std::size_t c, std::size_t extra) {
    for (std::size_t r = 0; r < extra; ++r) keep.push_back(by_class[c][rng.index(by_class[c].size())]);
  };

  if (std::holds_alternative<Oversample>(mode)) {
    keep.resize(ds.size());
    std::iota(keep.begin(), keep.end(), 0);
    for (std::size_t c = 0; c < by_class.size(); ++c) duplicate(c, counts[maj] - counts[c]);
  } else if (std::holds_alternative<Undersample>(mode)) {
    const std::size_t target = *std::min_element(counts.begin(), counts.end());
    for (auto& members : by_class) {
      std::vector<std::size_t> pool = members;
      std::shuffle(pool.begin(), pool.end(), rng.engine());
      pool.resize(target);
      keep.insert(keep.end(), pool.begin(), pool.end());
    }
    std::sort(keep.begin(), keep.end());
  } else {
    const double f = std::get<OversampleTo>(mode).fraction;
    const std::size_t minority_total = ds.size() - counts[maj];
    const double current = static_cast<double>(minority_total) / static_cast<double>(ds.size());
    if (!(f > current) || !(f < 1.0)) {
      throw ConfigError("resample: oversample fraction " + std::to_string(f) +
                        " must lie in (current minority fraction " + std::to_string(current) +
                        ", 1)");
    }
    const double exact = f * static_cast<double>(counts[maj]) / (1.0 - f);
    const auto target = static_cast<std::size_t>(std::ceil(exact - 1e-9));
    std::vector<double> weights;
    std::vector<std::size_t> minority;
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (c == maj) continue;
      minority.push_back(c);
      weights.push_back(static_cast<double>(counts[c]));
    }
    const auto targets = largest_remainder(target, weights);
    keep.resize(ds.size());
    std::iota(keep.begin(), keep.end(), 0);
    for (std::size_t j = 0; j < minority.size(); ++j) {
      const std::size_t c = minority[j];
      duplicate(c, targets[j] > counts[c] ? targets[j] - counts[c] : 0);
    }
  }
  return TrainSplit(ds.subset(keep));
}

}  // namespace sparseseq::ingest
