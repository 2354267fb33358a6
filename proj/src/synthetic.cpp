// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/datagen/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "sparseseq/errors.hpp"

namespace sparseseq::datagen {

void SyntheticParams::validate() const {
  if (!(p_min > 0.0 && p_min < p_max)) throw ConfigError("synthetic: need 0 < p_min < p_max");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
    throw ConfigError("synthetic: missing rate must lie in [0, 1)");
  }
  if (!(noise_std >= 0.0)) throw ConfigError("synthetic: noise std must be >= 0");
  if (!(minority > 0.0 && majority > 0.0)) throw ConfigError("synthetic: ratio parts must be > 0");
  if (seq_len == 0) throw ConfigError("synthetic: seq_len must be >= 1");
  if (class_quotas(n_samples, {majority, minority})[1] == 0) {
    throw ConfigError("synthetic: ratio leaves the minority class empty");
  }
}

Thresholds thresholds_for_rate(double minority_rate) {
  const double q = std::sqrt(minority_rate);
  return {q, q};
}

LatentFactors draw_factors(const SyntheticParams& params, num::Rng& rng) {
  LatentFactors f;
  f.offset = rng.uniform();
  f.period = rng.uniform(params.p_min, params.p_max);
  f.probability = rng.uniform();
  return f;
}

Series gen_series(const LatentFactors& f, std::size_t seq_len, double noise_std, num::Rng& rng) {
  if (seq_len == 0) throw ConfigError("gen_series: T must be >= 1");
  if (!(noise_std >= 0.0)) throw ConfigError("gen_series: noise std must be >= 0");
  Series s;
  s.x.resize(seq_len);
  s.b.resize(seq_len);
  for (std::size_t t = 0; t < seq_len; ++t) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / f.period;
    s.x[t] = 1.0 + f.offset + std::cos(phase);
    if (noise_std > 0.0) s.x[t] += rng.normal(0.0, noise_std);
  }
  for (std::size_t t = 0; t < seq_len; ++t) s.b[t] = rng.bernoulli(f.probability) ? 1.0 : 0.0;
  return s;
}

int label(const LatentFactors& f, const Thresholds& th, double p_min, double p_max) {
  const double period_cut = p_min + th.q_period * (p_max - p_min);
  const double prob_cut = 1.0 - th.q_prob;
  return (f.period <= period_cut && f.probability >= prob_cut) ? 1 : 0;
}

std::vector<std::uint8_t> inject_missing(std::vector<double>& values, double rate, num::Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("inject_missing: rate must lie in [0, 1)");
  std::vector<std::uint8_t> mask(values.size(), 1);
  if (rate == 0.0) return mask;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (rng.bernoulli(rate)) {
      mask[i] = 0;
      values[i] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return mask;
}

std::vector<std::size_t> class_quotas(std::size_t n, const std::vector<double>& shares) {
  double total = 0.0;
  for (double s : shares) {
    if (!(s > 0.0)) throw ConfigError("class_quotas: shares must be > 0");
    total += s;
  }
  std::vector<std::size_t> q(shares.size());
  std::size_t used = 0;
  for (std::size_t c = 0; c < shares.size(); ++c) {
    q[c] = static_cast<std::size_t>(std::floor(static_cast<double>(n) * shares[c] / total + 1e-9));
    used += q[c];
  }
  const auto big = std::max_element(shares.begin(), shares.end()) - shares.begin();
  q[big] += n - used;
  return q;
}

namespace {

ingest::TimeSeriesDataset generate(const SyntheticParams& params, std::size_t n_classes,
                                   const std::vector<std::size_t>& quota,
                                   const std::function<int(const LatentFactors&)>& classify) {
  ingest::TimeSeriesDataset ds;
  ds.variable_names = {"x", "b"};
  ds.n_static = 0;
  ds.n_classes = n_classes;
  ds.samples.reserve(params.n_samples);

  std::vector<double> times(params.seq_len);
  for (std::size_t t = 0; t < params.seq_len; ++t) times[t] = static_cast<double>(t);

  std::vector<std::size_t> filled(n_classes, 0);
  std::size_t remaining = params.n_samples;
  for (std::uint64_t k = 0; remaining > 0; ++k) {
    if (k >= kDrawBudget) {
      throw GenerationError("synthetic: class quotas not reached after " +
                            std::to_string(kDrawBudget) + " draws");
    }
    num::Rng rng(num::derive_seed(params.seed, {k}));
    const LatentFactors f = draw_factors(params, rng);
    const int y = classify(f);
    if (filled[y] >= quota[y]) continue;
    ++filled[y];
    --remaining;

    const Series s = gen_series(f, params.seq_len, params.noise_std, rng);
    ingest::Sample out;
    out.id = "syn-" + std::to_string(k);
    out.times = times;
    out.values.resize(2 * params.seq_len);
    for (std::size_t t = 0; t < params.seq_len; ++t) {
      out.values[2 * t] = s.x[t];
      out.values[2 * t + 1] = s.b[t];
    }
    out.mask = inject_missing(out.values, params.missing_rate, rng);
    out.label = y;
    ds.samples.push_back(std::move(out));
  }
  return ds;
}

}  // namespace

ingest::TimeSeriesDataset build_benchmark(const SyntheticParams& params) {
  params.validate();
  const auto quota = class_quotas(params.n_samples, {params.majority, params.minority});
  const Thresholds th = thresholds_for_rate(params.minority_rate());
  return generate(params, 2, quota, [&](const LatentFactors& f) {
    return label(f, th, params.p_min, params.p_max);
  });
}

ingest::TimeSeriesDataset build_multiclass_fixture(const SyntheticParams& params,
                                                   const std::vector<double>& shares) {
  params.validate();
  const std::size_t k = shares.size();
  if (k < 2) throw ConfigError("multiclass fixture: need at least 2 classes");
  const auto quota = class_quotas(params.n_samples, shares);
  return generate(params, k, quota, [&](const LatentFactors& f) {
    const double u = (f.period - params.p_min) / (params.p_max - params.p_min);
    return static_cast<int>(std::min<double>(static_cast<double>(k - 1), std::floor(u * k)));
  });
}

}  // namespace sparseseq::datagen
