// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>

#include "sparseseq/apc/apc.hpp"
#include "sparseseq/datagen/synthetic.hpp"
#include "sparseseq/errors.hpp"
#include "sparseseq/numcore/gradcheck.hpp"

using namespace sparseseq;
using namespace sparseseq::num;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t({r, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

Tensor random_mask(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t({r, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  t[0] = 1.0;
  return t;
}

datagen::SyntheticParams small_bench(double missing, std::uint64_t seed) {
  datagen::SyntheticParams p;
  p.n_samples = 40;
  p.seq_len = 12;
  p.missing_rate = missing;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("masked MSE hand example") {
  Graph g;
  const std::vector<Var> preds{g.constant(Tensor::scalar(0.0)), g.constant(Tensor::scalar(0.0))};
  const std::vector<Tensor> targets{Tensor::scalar(2.0), Tensor::scalar(3.0)};
  const std::vector<Tensor> masks{Tensor::scalar(1.0), Tensor::scalar(0.0)};
  CHECK(apc::masked_mse(preds, targets, masks).value().item() == 4.0);
}

TEST_CASE("masked MSE is zero where predictions match observed targets") {
  Rng rng(1);
  Graph g;
  const Tensor t = random_matrix(3, 2, rng), m = random_mask(3, 2, rng);
  Tensor p = t;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (m[i] == 0.0) p[i] = 99.0;
  }
  const std::vector<Var> preds{g.constant(p)};
  CHECK(apc::masked_mse(preds, std::vector<Tensor>{t}, std::vector<Tensor>{m}).value().item() == 0.0);
}

TEST_CASE("masked MSE ignores unobserved targets exactly") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t b = 1 + rng.index(4), d = 1 + rng.index(3), steps = 1 + rng.index(5);
    ParameterSet params;
    std::vector<Tensor> targets, masks, perturbed;
    for (std::size_t s = 0; s < steps; ++s) {
      params.add("y" + std::to_string(s), random_matrix(b, d, rng));
      targets.push_back(random_matrix(b, d, rng));
      masks.push_back(random_mask(b, d, rng));
      Tensor p = targets.back();
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (masks.back()[i] == 0.0) p[i] = trial % 2 ? 1e9 : rng.uniform(-1e6, 1e6);
      }
      perturbed.push_back(p);
    }
    auto run = [&](const std::vector<Tensor>& tg) {
      params.zero_grad();
      Graph g;
      std::vector<Var> preds;
      for (std::size_t s = 0; s < steps; ++s) preds.push_back(g.param(params.at("y" + std::to_string(s))));
      Var loss = apc::masked_mse(preds, tg, masks);
      g.backward(loss);
      std::vector<double> out{loss.value().item()};
      params.for_each([&](const Parameter& p) {
        for (std::size_t i = 0; i < p.grad.size(); ++i) out.push_back(p.grad[i]);
      });
      return out;
    };
    CHECK(run(targets) == run(perturbed));
  }
}

TEST_CASE("fully observed masked MSE is the plain mean squared error") {
  Rng rng(3);
  Graph g;
  const Tensor p = random_matrix(4, 3, rng), t = random_matrix(4, 3, rng);
  double ref = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) ref += (t[i] - p[i]) * (t[i] - p[i]);
  ref /= static_cast<double>(p.size());
  const std::vector<Var> preds{g.constant(p)};
  const double got =
      apc::masked_mse(preds, std::vector<Tensor>{t}, std::vector<Tensor>{Tensor({4, 3}, 1.0)}).value().item();
  CHECK(got == doctest::Approx(ref).epsilon(1e-14));
}

TEST_CASE("masked MSE without observed targets throws") {
  Graph g;
  const std::vector<Var> preds{g.constant(Tensor::scalar(1.0))};
  CHECK_THROWS_AS(apc::masked_mse(preds, std::vector<Tensor>{Tensor::scalar(0.0)},
                                  std::vector<Tensor>{Tensor::scalar(0.0)}),
                  NoObservedTargets);
}

TEST_CASE("prediction count follows the shift") {
  Graph g;
  std::vector<Var> states;
  for (int t = 0; t < 100; ++t) states.push_back(g.constant(Tensor::matrix(1, 4)));
  const Var W = g.constant(Tensor::matrix(4, 2));
  CHECK(apc::apc_forward(states, W, 1).size() == 99);
  CHECK(apc::apc_forward(states, W, 5).size() == 95);
  CHECK(apc::apc_forward(states, W, 0).size() == 100);
  CHECK_THROWS_AS(apc::apc_forward(states, W, 100), ConfigError);
}

TEST_CASE("identity rig at shift zero reproduces the input") {
  Rng rng(4);
  Graph g;
  std::vector<Var> states;
  std::vector<Tensor> xs;
  for (int t = 0; t < 5; ++t) {
    xs.push_back(random_matrix(2, 3, rng));
    states.push_back(g.constant(xs.back()));
  }
  const auto y = apc::apc_forward(states, g.constant(Tensor::identity(3)), 0);
  for (int t = 0; t < 5; ++t) {
    for (std::size_t i = 0; i < xs[t].size(); ++i) CHECK(y[t].value()[i] == xs[t][i]);
  }
}

TEST_CASE("L1 loss sums absolute differences") {
  Graph g;
  ParameterSet params;
  params.add("y", Tensor::from_rows({{1.0, -2.0, 5.0}}));
  const Var y = g.param(params.at("y"));
  const std::vector<Var> preds{y};
  const Var loss = apc::l1_loss(preds, std::vector<Tensor>{Tensor::from_rows({{0.0, 0.0, 5.0}})});
  CHECK(loss.value().item() == 3.0);
  g.backward(loss);
  CHECK(params.at("y").grad[0] == 1.0);
  CHECK(params.at("y").grad[1] == -1.0);
  CHECK(params.at("y").grad[2] == 0.0);
}

TEST_CASE("gradient of the APC pipeline") {
  for (auto family : {enc::Family::gru, enc::Family::grud}) {
    for (auto loss : {apc::Loss::masked_mse, apc::Loss::l1}) {
      enc::EncoderConfig ec;
      ec.family = family;
      ec.scheme = family == enc::Family::grud ? enc::Scheme::grud : enc::Scheme::flags;
      ec.n_vars = 2;
      ec.hidden = 4;
      Rng rng(5);
      auto params = enc::init_encoder(ec, rng);
      params.merge(apc::init_projection(4, 2, rng));
      params.for_each([&](Parameter& p) {
        for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] += rng.uniform(0.05, 0.2);
      });
      auto p = small_bench(0.4, 3);
      p.n_samples = 6;
      p.seq_len = 8;
      const auto ds = datagen::build_benchmark(p);
      const auto stats = ingest::compute_stats(ingest::TrainSplit(ds));
      const auto view = enc::impute_view(ingest::normalize(ds, stats), ingest::normalized_view(stats), ec.scheme);
      const auto batch = enc::make_batch(view, {0, 1, 2, 3});
      apc::ApcConfig cfg;
      cfg.loss = loss;
      // L1 has kinks; keep the step away from them
      const double err = grad_check([&](Graph& g) { return apc::apc_batch_loss(g, params, ec, cfg, batch); },
                                    params, loss == apc::Loss::l1 ? 1e-6 : 1e-5);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("pre-training is deterministic and stays finite under heavy missingness") {
  const auto ds = datagen::build_benchmark(small_bench(0.6, 9));
  const ingest::TrainSplit train(ds);
  enc::EncoderConfig ec;
  ec.family = enc::Family::grud;
  ec.scheme = enc::Scheme::grud;
  ec.hidden = 8;
  apc::ApcConfig cfg;
  cfg.epochs = 100;
  cfg.batch_size = 16;
  const auto a = apc::pretrain(ec, train, cfg, 42);
  const auto b = apc::pretrain(ec, train, cfg, 42);
  CHECK(a.params == b.params);
  CHECK(a.loss_curve == b.loss_curve);
  REQUIRE(a.loss_curve.size() == 100);
  for (double l : a.loss_curve) CHECK(std::isfinite(l));
}

TEST_CASE("next-step prediction learns the noise-free cosine") {
  auto p = small_bench(0.0, 5);
  p.n_samples = 200;
  p.seq_len = 100;
  p.noise_std = 0.0;
  const auto ds = datagen::build_benchmark(p);
  enc::EncoderConfig ec;
  ec.hidden = 64;
  apc::ApcConfig cfg;
  cfg.epochs = 50;
  const ingest::TrainSplit train(ds);
  auto r = apc::pretrain(ec, train, cfg, 1);

  // The binary stream is Bernoulli noise, so only the cosine channel can be
  // predicted; its error is measured separately.
  const auto view = enc::impute_view(ingest::normalize(ds, r.stats), ingest::normalized_view(r.stats), ec.scheme);
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto batch = enc::make_batch(view, all);
  Graph g(false);
  enc::EncodeOptions opts;
  opts.keep_states = true;
  const auto out = enc::encode(g, enc::bind_encoder(g, r.params, ec), ec, batch, opts);
  const auto y = apc::apc_forward(out.states, g.param(r.params.at("apc.W")), 1);
  double sse = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    for (std::size_t i = 0; i < batch.size; ++i) {
      const double e = y[t].value()(i, 0) - batch.values[t + 1](i, 0);
      sse += e * e;
      ++count;
    }
  }
  const double mse_x = sse / static_cast<double>(count);
  MESSAGE("masked MSE " << r.loss_curve.back() << ", cosine channel " << mse_x);
  CHECK(mse_x < 0.05);
}
