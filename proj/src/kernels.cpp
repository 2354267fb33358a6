// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/numcore/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstring>
#include <vector>

namespace sparseseq::num::kernels {

namespace {

bool go_parallel(std::size_t m, std::size_t k, std::size_t n) {
  return m * k * n >= kParallelThreshold && omp_get_max_threads() > 1;
}

}  // namespace

void set_num_threads(int n) { omp_set_num_threads(std::max(1, n)); }
int num_threads() { return omp_get_max_threads(); }

// All three kernels share one shape: for a block of up to four output rows,
// stream rows of a right-hand matrix once and update every row of the block.
// Each output entry still sums its terms in ascending inner index, so results
// do not depend on the row partition between threads.

namespace {

constexpr std::size_t kBlock = 8;
constexpr std::size_t kTile = 16;

using v8 = double __attribute__((vector_size(64)));

inline v8 load8(const double* p) {
  v8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store8(double* p, v8 v) { std::memcpy(p, &v, sizeof v); }

/// C[r, :] (+)= sum_p A(r, p) * B[p, :] for r in [r0, r0 + rows), where
/// A(r, p) = a[r * a_row + p * a_col]. An 8 x 16 tile of C stays in registers
/// while p runs over the inner dimension.
inline void row_block(const double* __restrict a, std::size_t a_row, std::size_t a_col,
                      const double* __restrict b, double* __restrict c, std::size_t r0,
                      std::size_t rows, std::size_t inner, std::size_t n, bool accumulate) {
  double* __restrict c0 = c + r0 * n;
  if (!accumulate) std::fill(c0, c0 + rows * n, 0.0);
  const double* a0 = a + r0 * a_row;
  std::size_t j0 = 0;
  if (rows == kBlock) {
    for (; j0 + kTile <= n; j0 += kTile) {
      v8 lo[kBlock], hi[kBlock];
#pragma GCC unroll 8
      for (std::size_t r = 0; r < kBlock; ++r) {
        lo[r] = load8(c0 + r * n + j0);
        hi[r] = load8(c0 + r * n + j0 + 8);
      }
      for (std::size_t p = 0; p < inner; ++p) {
        const double* brow = b + p * n + j0;
        const v8 bl = load8(brow), bh = load8(brow + 8);
        const double* ap = a0 + p * a_col;
#pragma GCC unroll 8
        for (std::size_t r = 0; r < kBlock; ++r) {
          const double s = ap[r * a_row];
          lo[r] += s * bl;
          hi[r] += s * bh;
        }
      }
#pragma GCC unroll 8
      for (std::size_t r = 0; r < kBlock; ++r) {
        store8(c0 + r * n + j0, lo[r]);
        store8(c0 + r * n + j0 + 8, hi[r]);
      }
    }
  }
  if (j0 == n) return;
  for (std::size_t r = 0; r < rows; ++r) {
    double* __restrict crow = c0 + r * n;
    for (std::size_t p = 0; p < inner; ++p) {
      const double av = a0[r * a_row + p * a_col];
      const double* __restrict brow = b + p * n;
      for (std::size_t j = j0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

/// C[i, p] (+)= dot(G[i, :], B[p, :]) for i in [i0, i0 + rows): 4 x 4 blocks
/// of independent dot products, 8 lanes wide, lanes summed in a fixed order.
inline void dot_block(const double* __restrict g, const double* __restrict b,
                      double* __restrict c, std::size_t i0, std::size_t rows, std::size_t k,
                      std::size_t n, bool accumulate) {
  constexpr std::size_t R = 4;
  const std::size_t nv = n - n % 8;
  auto finish = [&](v8 acc, const double* grow, const double* brow, double& out) {
    double s = 0.0;
    for (int l = 0; l < 8; ++l) s += acc[l];
    for (std::size_t j = nv; j < n; ++j) s += grow[j] * brow[j];
    out = accumulate ? out + s : s;
  };
  for (std::size_t p0 = 0; p0 < k; p0 += R) {
    const std::size_t pr = std::min(R, k - p0);
    if (rows == R && pr == R) {
      v8 acc[R][R] = {};
      for (std::size_t j = 0; j < nv; j += 8) {
        v8 gv[R], bv[R];
#pragma GCC unroll 4
        for (std::size_t r = 0; r < R; ++r) {
          gv[r] = load8(g + (i0 + r) * n + j);
          bv[r] = load8(b + (p0 + r) * n + j);
        }
#pragma GCC unroll 4
        for (std::size_t r = 0; r < R; ++r)
#pragma GCC unroll 4
          for (std::size_t q = 0; q < R; ++q) acc[r][q] += gv[r] * bv[q];
      }
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t q = 0; q < R; ++q)
          finish(acc[r][q], g + (i0 + r) * n, b + (p0 + q) * n, c[(i0 + r) * k + p0 + q]);
      continue;
    }
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t q = 0; q < pr; ++q) {
        v8 acc = {};
        const double* grow = g + (i0 + r) * n;
        const double* brow = b + (p0 + q) * n;
        for (std::size_t j = 0; j < nv; j += 8) acc += load8(grow + j) * load8(brow + j);
        finish(acc, grow, brow, c[(i0 + r) * k + p0 + q]);
      }
  }
}

void blocked(const double* a, std::size_t a_row, std::size_t a_col, const double* b, double* c,
             std::size_t out_rows, std::size_t inner, std::size_t n, bool accumulate,
             bool parallel) {
  const auto blocks = static_cast<std::ptrdiff_t>((out_rows + kBlock - 1) / kBlock);
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t r0 = static_cast<std::size_t>(blk) * kBlock;
    row_block(a, a_row, a_col, b, c, r0, std::min(kBlock, out_rows - r0), inner, n, accumulate);
  }
}

}  // namespace

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  blocked(a.data(), k, 1, b.data(), c.data(), m, k, n, accumulate, go_parallel(m, k, n));
}

void gemm_tn(std::span<const double> a, std::span<const double> g, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  // output row p of C = A^T G reads column p of A
  blocked(a.data(), 1, k, g.data(), c.data(), k, m, n, accumulate, go_parallel(m, k, n));
}

void gemm_nt(std::span<const double> g, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const auto blocks = static_cast<std::ptrdiff_t>((m + 3) / 4);
#pragma omp parallel for schedule(static) if (go_parallel(m, k, n))
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * 4;
    dot_block(g.data(), b.data(), c.data(), i0, std::min<std::size_t>(4, m - i0), k, n,
              accumulate);
  }
}

namespace reference {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = accumulate ? c[i * n + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
}

void gemm_tn(std::span<const double> a, std::span<const double> g, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) {
      double s = accumulate ? c[p * n + j] : 0.0;
      for (std::size_t i = 0; i < m; ++i) s += a[i * k + p] * g[i * n + j];
      c[p * n + j] = s;
    }
}

void gemm_nt(std::span<const double> g, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double s = accumulate ? c[i * k + p] : 0.0;
      for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * b[p * n + j];
      c[i * k + p] = s;
    }
}

}  // namespace reference

}  // namespace sparseseq::num::kernels
