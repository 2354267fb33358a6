// SPDX-License-Identifier: Apache-2.0
// Serial reference vs OpenMP kernels on the matrix shapes a GRU step produces.
#include <benchmark/benchmark.h>

#include "sparseseq/numcore/kernels.hpp"
#include "sparseseq/numcore/rng.hpp"

namespace {

using sparseseq::num::Rng;
using sparseseq::num::Tensor;
namespace kernels = sparseseq::num::kernels;

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({r, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1, 1);
  return t;
}

// Args: batch, hidden. Shapes are the recurrent product h[B,H] * U[H,3H].
template <bool Reference>
void BM_GemmNN(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const std::size_t n = 3 * k;
  const Tensor a = random_matrix(m, k, 1), b = random_matrix(k, n, 2);
  Tensor c({m, n});
  for (auto _ : state) {
    if constexpr (Reference) {
      kernels::reference::gemm_nn(a.data(), b.data(), c.data(), m, k, n);
    } else {
      kernels::gemm_nn(a.data(), b.data(), c.data(), m, k, n);
    }
    benchmark::DoNotOptimize(c.raw());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m * k * n));
}

template <bool Reference>
void BM_GemmTN(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const std::size_t n = 3 * k;
  const Tensor a = random_matrix(m, k, 1), g = random_matrix(m, n, 2);
  Tensor c({k, n});
  for (auto _ : state) {
    if constexpr (Reference) {
      kernels::reference::gemm_tn(a.data(), g.data(), c.data(), m, k, n);
    } else {
      kernels::gemm_tn(a.data(), g.data(), c.data(), m, k, n);
    }
    benchmark::DoNotOptimize(c.raw());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m * k * n));
}

template <bool Reference>
void BM_GemmNT(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const std::size_t n = 3 * k;
  const Tensor g = random_matrix(m, n, 1), b = random_matrix(k, n, 2);
  Tensor c({m, k});
  for (auto _ : state) {
    if constexpr (Reference) {
      kernels::reference::gemm_nt(g.data(), b.data(), c.data(), m, k, n);
    } else {
      kernels::gemm_nt(g.data(), b.data(), c.data(), m, k, n);
    }
    benchmark::DoNotOptimize(c.raw());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m * k * n));
}

void shapes(benchmark::internal::Benchmark* b) {
  for (int batch : {32, 100})
    for (int hidden : {32, 64, 120, 250}) b->Args({batch, hidden});
}

}  // namespace

BENCHMARK(BM_GemmNN<true>)->Name("gemm_nn/reference")->Apply(shapes);
BENCHMARK(BM_GemmNN<false>)->Name("gemm_nn/omp")->Apply(shapes);
BENCHMARK(BM_GemmTN<true>)->Name("gemm_tn/reference")->Apply(shapes);
BENCHMARK(BM_GemmTN<false>)->Name("gemm_tn/omp")->Apply(shapes);
BENCHMARK(BM_GemmNT<true>)->Name("gemm_nt/reference")->Apply(shapes);
BENCHMARK(BM_GemmNT<false>)->Name("gemm_nt/omp")->Apply(shapes);

BENCHMARK_MAIN();
