// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

namespace sparseseq::metrics {

/// P(score of a random positive > score of a random negative), ties count 1/2.
/// Throws MetricUndefined unless both classes are present.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Average precision: sum_k (R_k - R_{k-1}) P_k over descending distinct
/// score thresholds, tied scores entering together. Throws MetricUndefined
/// without a positive.
double auprc(std::span<const double> scores, std::span<const int> labels);

struct F1Report {
  std::vector<double> per_class;  // percentage points
  std::vector<std::size_t> support;
  double weighted = 0.0;
  double weighted_minority = 0.0;
  std::size_t majority = 0;
  std::vector<std::string> warnings;
};

/// Support-weighted mean of per-class F1 values, and the same mean over the
/// classes other than the majority (largest support, lowest index on ties).
F1Report aggregate_f1(std::span<const double> per_class, std::span<const std::size_t> support);

/// One-vs-rest F1 per class from argmax predictions, support-weighted mean,
/// and the support-weighted mean over every class except the majority.
/// A class with no true and no predicted sample scores 0 with a warning.
F1Report f1_scores(std::span<const int> predicted, std::span<const int> truth,
                   std::size_t n_classes);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t n = 0;
};

Summary summarize(std::span<const double> values);

/// "mean ± std" with one decimal, e.g. "20.0 ± 8.2".
std::string format_mean_std(const Summary& s);

}  // namespace sparseseq::metrics
