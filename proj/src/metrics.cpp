// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "sparseseq/errors.hpp"

namespace sparseseq::metrics {

namespace {

void check_binary(std::span<const double> scores, std::span<const int> labels, const char* who) {
  if (scores.size() != labels.size()) {
    throw DimensionError(std::string(who) + ": " + std::to_string(scores.size()) + " scores, " +
                         std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw ContractError(std::string(who) + ": labels must be 0 or 1");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError(std::string(who) + ": non-finite score");
  }
}

std::vector<std::size_t> descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_binary(scores, labels, "auroc");
  const auto npos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t nneg = labels.size() - npos;
  if (npos == 0 || nneg == 0) throw MetricUndefined("auroc: needs both classes");

  // Walk tie groups from the top; each positive beats every negative ranked
  // strictly below it and half-beats the negatives in its own group.
  const auto order = descending(scores);
  double wins = 0.0;
  std::size_t neg_above = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i, pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? pos : neg) += 1;
      ++j;
    }
    const std::size_t neg_below = nneg - neg_above - neg;
    wins += static_cast<double>(pos * neg_below) + 0.5 * static_cast<double>(pos * neg);
    neg_above += neg;
    i = j;
  }
  return wins / (static_cast<double>(npos) * static_cast<double>(nneg));
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
  check_binary(scores, labels, "auprc");
  const auto npos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (npos == 0) throw MetricUndefined("auprc: no positive label");

  const auto order = descending(scores);
  double ap = 0.0, recall_prev = 0.0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(npos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - recall_prev) * precision;
    recall_prev = recall;
    i = j;
  }
  return ap;
}

F1Report aggregate_f1(std::span<const double> per_class, std::span<const std::size_t> support) {
  if (per_class.size() != support.size()) throw DimensionError("aggregate_f1: length mismatch");
  F1Report rep;
  rep.per_class.assign(per_class.begin(), per_class.end());
  rep.support.assign(support.begin(), support.end());
  if (support.empty()) return rep;
  double n = 0.0;
  for (std::size_t s : support) n += static_cast<double>(s);
  rep.majority = static_cast<std::size_t>(std::max_element(support.begin(), support.end()) - support.begin());
  double minority_total = 0.0;
  for (std::size_t c = 0; c < support.size(); ++c) {
    if (n > 0) rep.weighted += static_cast<double>(support[c]) / n * per_class[c];
    if (c != rep.majority) minority_total += static_cast<double>(support[c]);
  }
  if (minority_total > 0) {
    for (std::size_t c = 0; c < support.size(); ++c) {
      if (c != rep.majority) {
        rep.weighted_minority += static_cast<double>(support[c]) / minority_total * per_class[c];
      }
    }
  }
  return rep;
}

F1Report f1_scores(std::span<const int> predicted, std::span<const int> truth,
                   std::size_t n_classes) {
  if (n_classes < 2) throw ContractError("f1_scores: need at least 2 classes");
  if (predicted.size() != truth.size()) throw DimensionError("f1_scores: length mismatch");
  const std::size_t k = n_classes;
  std::vector<std::size_t> tp(k, 0), fp(k, 0), fn(k, 0);
  F1Report rep;
  rep.support.assign(k, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int y = truth[i], p = predicted[i];
    if (y < 0 || p < 0 || static_cast<std::size_t>(y) >= k || static_cast<std::size_t>(p) >= k) {
      throw ContractError("f1_scores: class index out of range");
    }
    ++rep.support[y];
    if (y == p) {
      ++tp[y];
    } else {
      ++fp[p];
      ++fn[y];
    }
  }
  rep.per_class.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom == 0) {
      rep.per_class[c] = 0.0;
      rep.warnings.push_back("class " + std::to_string(c) + " has no true or predicted sample");
    } else {
      rep.per_class[c] = 100.0 * static_cast<double>(2 * tp[c]) / static_cast<double>(denom);
    }
  }
  const auto agg = aggregate_f1(rep.per_class, rep.support);
  rep.weighted = agg.weighted;
  rep.weighted_minority = agg.weighted_minority;
  rep.majority = agg.majority;
  return rep;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) return s;
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(v.size()));
  return s;
}

std::string format_mean_std(const Summary& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f ± %.1f", s.mean, s.std);
  return buf;
}

}  // namespace sparseseq::metrics
