// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sparseseq/datagen/synthetic.hpp"
#include "sparseseq/errors.hpp"

using namespace sparseseq;
using namespace sparseseq::datagen;

TEST_CASE("gen_series: noise-free values") {
  num::Rng rng(1);
  auto s = gen_series({0.0, 10.0, 0.5}, 5, 0.0, rng);
  CHECK(s.x[0] == 2.0);
  s = gen_series({0.5, 4.0, 0.5}, 5, 0.0, rng);
  CHECK(s.x[1] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK_THROWS_AS(gen_series({0.0, 10.0, 0.5}, 5, -0.1, rng), ConfigError);
}

TEST_CASE("gen_series: degenerate Bernoulli and exact cosine") {
  num::Rng rng(2);
  for (double x : gen_series({0.3, 7.0, 1.0}, 50, 0.0, rng).b) CHECK(x == 1.0);
  for (double x : gen_series({0.3, 7.0, 0.0}, 50, 0.0, rng).b) CHECK(x == 0.0);
  const LatentFactors f{0.37, 13.3, 0.5};
  const auto s = gen_series(f, 100, 0.0, rng);
  double worst = 0.0;
  for (std::size_t t = 0; t < 100; ++t) {
    worst = std::max(worst, std::fabs(s.x[t] - (1.0 + f.offset +
                                                std::cos(2.0 * std::numbers::pi * t / f.period))));
  }
  CHECK(worst == 0.0);
}

TEST_CASE("label: extremes and Monte-Carlo positive rate") {
  const Thresholds th = thresholds_for_rate(0.5);
  CHECK(label({0.5, 5.0, 1.0}, th, 5, 20) == 1);
  CHECK(label({0.5, 20.0, 0.0}, th, 5, 20) == 0);

  SyntheticParams p;
  num::Rng rng(17);
  for (double r : {0.5, 0.3, 1.0 / 21.0}) {
    const Thresholds t = thresholds_for_rate(r);
    std::size_t pos = 0;
    const std::size_t n = 100000;
    for (std::size_t i = 0; i < n; ++i) pos += label(draw_factors(p, rng), t, p.p_min, p.p_max);
    const double rate = double(pos) / n;
    // 4 binomial standard errors
    CHECK(std::fabs(rate - r) < 4.0 * std::sqrt(r * (1 - r) / n));
  }
}

TEST_CASE("inject_missing: rates and determinism") {
  std::vector<double> v(40, 1.0);
  num::Rng a(5);
  auto m = inject_missing(v, 0.0, a);
  CHECK(std::count(m.begin(), m.end(), 1) == 40);
  CHECK(v == std::vector<double>(40, 1.0));

  std::vector<double> big(2000 * 100 * 2, 1.0);
  num::Rng b(6);
  m = inject_missing(big, 0.6, b);
  const double missing = 1.0 - double(std::count(m.begin(), m.end(), 1)) / m.size();
  CHECK(std::fabs(missing - 0.6) < 0.01);
  for (std::size_t i = 0; i < big.size(); ++i) CHECK((m[i] == 1) == std::isfinite(big[i]));

  std::vector<double> c1(100, 2.0), c2(100, 2.0);
  num::Rng r1(9), r2(9);
  CHECK(inject_missing(c1, 0.3, r1) == inject_missing(c2, 0.3, r2));
}

TEST_CASE("class quotas") {
  CHECK(class_quotas(2000, {1, 1}) == std::vector<std::size_t>{1000, 1000});
  CHECK(class_quotas(2000, {20, 1}) == std::vector<std::size_t>{1905, 95});
  CHECK(class_quotas(2000, {7, 3}) == std::vector<std::size_t>{1400, 600});
}

TEST_CASE("build_benchmark: exact counts, observed fraction, determinism") {
  SyntheticParams p;
  p.n_samples = 600;
  p.minority = 1;
  p.majority = 20;
  p.missing_rate = 0.3;
  p.seed = 3;
  const auto ds = build_benchmark(p);
  ds.validate();
  CHECK(ds.size() == 600);
  CHECK(ds.class_counts() == class_quotas(600, {20, 1}));
  CHECK(ds.n_vars() == 2);
  CHECK(ds.samples[0].times.back() == 99.0);
  CHECK(std::fabs(ds.observed_fraction() - 0.7) < 0.01);

  const auto again = build_benchmark(p);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds.samples[i].mask == again.samples[i].mask);
    CHECK(ds.samples[i].label == again.samples[i].label);
  }

  p.minority = 3;
  p.majority = 7;
  p.n_samples = 2000;
  p.seq_len = 5;
  CHECK(build_benchmark(p).class_counts() == std::vector<std::size_t>{1400, 600});
}

TEST_CASE("build_benchmark: labels depend only on latent factors") {
  SyntheticParams p;
  p.n_samples = 200;
  p.seq_len = 10;
  const auto clean = build_benchmark(p);
  p.missing_rate = 0.6;
  p.noise_std = 0.5;
  const auto noisy = build_benchmark(p);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    CHECK(clean.samples[i].id == noisy.samples[i].id);
    CHECK(clean.samples[i].label == noisy.samples[i].label);
  }
}

TEST_CASE("build_benchmark: parameter errors") {
  SyntheticParams p;
  p.missing_rate = 1.0;
  CHECK_THROWS_AS(build_benchmark(p), ConfigError);
  p = {};
  p.p_min = 25;
  CHECK_THROWS_AS(build_benchmark(p), ConfigError);
  p = {};
  p.n_samples = 10;
  p.minority = 1;
  p.majority = 20;
  CHECK_THROWS_AS(build_benchmark(p), ConfigError);
}

TEST_CASE("multiclass fixture: quotas by K-tile of the period") {
  SyntheticParams p;
  p.n_samples = 400;
  p.seq_len = 8;
  const auto ds = build_multiclass_fixture(p, {10, 5, 3, 2});
  CHECK(ds.n_classes == 4);
  CHECK(ds.class_counts() == std::vector<std::size_t>{200, 100, 60, 40});
}
