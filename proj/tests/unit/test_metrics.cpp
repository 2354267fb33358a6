// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "sparseseq/errors.hpp"
#include "sparseseq/metrics/metrics.hpp"
#include "sparseseq/numcore/rng.hpp"
#include "oracles.hpp"

using namespace sparseseq;
using namespace sparseseq::metrics;

TEST_CASE("AUROC examples") {
  CHECK(auroc(std::vector<double>{0.9, 0.8, 0.3, 0.2}, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK(auroc(std::vector<double>{0.9, 0.4, 0.6, 0.2}, std::vector<int>{1, 0, 0, 1}) == 0.5);
  CHECK(auroc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1, 0}) == 0.5);
  CHECK_THROWS_AS(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), MetricUndefined);
}

TEST_CASE("AUPRC examples") {
  CHECK(auprc(std::vector<double>{0.9, 0.8, 0.3, 0.2}, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK(auprc(std::vector<double>{0.9, 0.8, 0.7, 0.1}, std::vector<int>{1, 0, 1, 0}) ==
        doctest::Approx(0.5 + (2.0 / 3.0) * 0.5).epsilon(1e-15));
  CHECK_THROWS_AS(auprc(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 0}), MetricUndefined);
}

TEST_CASE("AUPRC of random scores approaches the prevalence") {
  num::Rng rng(1);
  const double prevalence = 0.2;
  std::vector<double> s(10000);
  std::vector<int> y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    y[i] = rng.bernoulli(prevalence) ? 1 : 0;
  }
  CHECK(std::abs(auprc(s, y) - prevalence) <= 0.03);
}

TEST_CASE("ranking metrics match brute-force oracles") {
  num::Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto inst = oracle::random_instance(rng);
    CHECK(auroc(inst.scores, inst.labels) == oracle::auroc_pairs(inst.scores, inst.labels));
    CHECK(std::abs(auprc(inst.scores, inst.labels) - oracle::auprc_thresholds(inst.scores, inst.labels)) <= 1e-12);
  }
}

TEST_CASE("F1 examples") {
  const std::vector<int> truth{0, 0, 1, 1, 2};
  const auto perfect = f1_scores(truth, truth, 3);
  CHECK(perfect.weighted == 100.0);
  CHECK(perfect.weighted_minority == doctest::Approx(100.0).epsilon(1e-14));
  for (double f : perfect.per_class) CHECK(f == 100.0);

  const std::vector<int> y{0, 0, 0, 0, 0, 0, 1, 1, 1, 2};
  const std::vector<int> p{0, 0, 0, 0, 0, 0, 1, 2, 2, 1};
  const auto r = f1_scores(p, y, 3);
  CHECK(r.per_class == std::vector<double>{100.0, 40.0, 0.0});
  CHECK(r.weighted == doctest::Approx(72.0).epsilon(1e-14));
  CHECK(r.weighted_minority == doctest::Approx(30.0).epsilon(1e-14));

  // counts (6, 3, 1) with per-class F1 (100, 50, 0): 0.6 * 100 + 0.3 * 50 = 75
  const auto agg = aggregate_f1(std::vector<double>{100, 50, 0}, std::vector<std::size_t>{6, 3, 1});
  CHECK(agg.weighted == doctest::Approx(75.0).epsilon(1e-14));
  CHECK(agg.weighted_minority == doctest::Approx(37.5).epsilon(1e-14));

  // only the majority predicted
  const std::vector<int> y4{0, 0, 0, 0, 0, 0, 0, 1, 1, 2, 3};
  const std::vector<int> p4(y4.size(), 0);
  const auto m = f1_scores(p4, y4, 4);
  CHECK(m.weighted == doctest::Approx(7.0 / 11.0 * m.per_class[0]).epsilon(1e-14));
  CHECK(m.weighted_minority == 0.0);
  CHECK(m.majority == 0);
}

TEST_CASE("F1 of an absent class scores zero with a warning") {
  const std::vector<int> y{0, 0, 1};
  const auto r = f1_scores(y, y, 3);
  CHECK(r.per_class[2] == 0.0);
  CHECK(r.warnings.size() == 1);
}

TEST_CASE("weighted F1 matches the confusion-matrix oracle") {
  num::Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng.index(4), n = 1 + rng.index(200);
    std::vector<int> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng.index(k));
      p[i] = rng.bernoulli(0.6) ? y[i] : static_cast<int>(rng.index(k));
    }
    const auto r = f1_scores(p, y, k);
    const auto o = oracle::f1_confusion(p, y, k);
    CHECK(r.per_class == o.per_class);
    CHECK(r.weighted == o.weighted);
    CHECK(r.weighted_minority == o.weighted_minority);
  }
}

TEST_CASE("summary statistics") {
  const std::vector<double> v{10, 20, 30};
  const auto s = summarize(v);
  CHECK(s.mean == 20.0);
  CHECK(s.std == doctest::Approx(8.16496580927726).epsilon(1e-14));
  CHECK(s.median == 20.0);
  CHECK(s.min == 10.0);
  CHECK(s.max == 30.0);
  CHECK(format_mean_std(s) == "20.0 ± 8.2");
  CHECK(summarize(std::vector<double>{4, 1, 3, 2}).median == 2.5);
}
