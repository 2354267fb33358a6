// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

// Dense matrix-product kernels used by the autodiff primitives.
//
// Two implementations share one contract:
//   kernels::           OpenMP row-partitioned, cache-friendly loop order
//   kernels::reference  plain triple loops, serial; kept as the test oracle
//
// Every output element is owned by exactly one thread and its reduction runs
// over the inner dimension in ascending order, so results are bit-identical
// for any thread count.
//
// Layout: all matrices row-major. `accumulate=false` overwrites the output.

namespace sparseseq::num::kernels {

/// C[m,n] (+)= A[m,k] * B[k,n]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

/// C[k,n] (+)= A[m,k]^T * G[m,n]      (weight gradient of a matmul)
void gemm_tn(std::span<const double> a, std::span<const double> g, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

/// C[m,k] (+)= G[m,n] * B[k,n]^T      (input gradient of a matmul)
void gemm_nt(std::span<const double> g, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

/// Threads used by the parallel kernels in the calling thread (OpenMP ICV).
void set_num_threads(int n);
int num_threads();

/// Work (m*k*n multiply-adds) below which kernels stay serial.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 16;

namespace reference {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void gemm_tn(std::span<const double> a, std::span<const double> g, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void gemm_nt(std::span<const double> g, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

}  // namespace reference

}  // namespace sparseseq::num::kernels
