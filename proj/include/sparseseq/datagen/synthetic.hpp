// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "sparseseq/ingest/dataset.hpp"
#include "sparseseq/numcore/rng.hpp"

// Two-variable synthetic benchmark. Each sample has a noisy cosine
//   x(t) = 1 + o + cos(2 pi t / P) + eps,  eps ~ N(0, sigma)
// and a binary stream b(t) ~ Bernoulli(p). The label is a conjunction of
// thresholds on the latent period P and probability p.

namespace sparseseq::datagen {

struct SyntheticParams {
  std::size_t n_samples = 2000;
  std::size_t seq_len = 100;
  double p_min = 5.0;
  double p_max = 20.0;
  double noise_std = 0.1;
  double missing_rate = 0.0;
  /// minority:majority, e.g. 1:20. Class 1 is the minority (positive) class.
  double minority = 1.0;
  double majority = 1.0;
  std::uint64_t seed = 7;

  /// r = minority / (minority + majority)
  double minority_rate() const { return minority / (minority + majority); }
  /// Throws ConfigError on out-of-range fields.
  void validate() const;
};

struct LatentFactors {
  double offset;       // o in [0, 1]
  double period;       // P in [p_min, p_max]
  double probability;  // p in [0, 1]
};

struct Thresholds {
  double q_period;  // quantile of P below which a sample may be positive
  double q_prob;    // upper-tail mass of p above which a sample may be positive
};

/// q_P = q_p = sqrt(r).
Thresholds thresholds_for_rate(double minority_rate);

LatentFactors draw_factors(const SyntheticParams& params, num::Rng& rng);

struct Series {
  std::vector<double> x;
  std::vector<double> b;
};

/// t = 0..T-1. Throws ConfigError if sigma < 0 or T == 0.
Series gen_series(const LatentFactors& f, std::size_t seq_len, double noise_std, num::Rng& rng);

/// 1 iff P <= quantile_P(q_P) and p >= quantile_p(1 - q_p).
int label(const LatentFactors& f, const Thresholds& th, double p_min, double p_max);

/// Drops each entry of a row-major grid independently with probability rate;
/// dropped entries become NaN. Returns the mask (1 = observed).
std::vector<std::uint8_t> inject_missing(std::vector<double>& values, double rate, num::Rng& rng);

/// Per-class sample counts: floor(N * share / sum) each, remainder to the
/// largest share (lowest class index on ties).
std::vector<std::size_t> class_quotas(std::size_t n, const std::vector<double>& shares);

/// Binary benchmark with exact quotas. Draw k uses derive_seed(seed, {k});
/// throws GenerationError after 10^6 draws without filling every quota.
ingest::TimeSeriesDataset build_benchmark(const SyntheticParams& params);

/// Test fixture for the multiclass code paths: K classes by K-tile of the
/// period P, class counts from `shares`. Not part of the binary benchmark.
ingest::TimeSeriesDataset build_multiclass_fixture(const SyntheticParams& params,
                                                   const std::vector<double>& shares);

inline constexpr std::size_t kDrawBudget = 1'000'000;

}  // namespace sparseseq::datagen
