#pragma once

// Single-threaded blocked matrix multiply used by conv2d and dense.
// Accumulation order is fixed, so results are bit-reproducible run to run.

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

namespace wafer::core::detail {

/// C[M,N] (+)= A[M,K] * B[K,N], all row-major with explicit leading dims.
template <typename T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B,
             std::size_t ldb, T* C, std::size_t ldc, bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < M; ++i) std::memset(C + i * ldc, 0, N * sizeof(T));
  }
  constexpr std::size_t kColBlock = 1024 / sizeof(T) * 2;
  constexpr std::size_t kDepthBlock = 128;
  for (std::size_t j0 = 0; j0 < N; j0 += kColBlock) {
    const std::size_t nb = std::min(kColBlock, N - j0);
    for (std::size_t k0 = 0; k0 < K; k0 += kDepthBlock) {
      const std::size_t kb = std::min(kDepthBlock, K - k0);
      std::size_t i = 0;
      for (; i + 4 <= M; i += 4) {
        T* __restrict c0 = C + (i + 0) * ldc + j0;
        T* __restrict c1 = C + (i + 1) * ldc + j0;
        T* __restrict c2 = C + (i + 2) * ldc + j0;
        T* __restrict c3 = C + (i + 3) * ldc + j0;
        for (std::size_t k = k0; k < k0 + kb; ++k) {
          const T a0 = A[(i + 0) * lda + k];
          const T a1 = A[(i + 1) * lda + k];
          const T a2 = A[(i + 2) * lda + k];
          const T a3 = A[(i + 3) * lda + k];
          const T* __restrict b = B + k * ldb + j0;
          for (std::size_t j = 0; j < nb; ++j) {
            const T bv = b[j];
            c0[j] += a0 * bv;
            c1[j] += a1 * bv;
            c2[j] += a2 * bv;
            c3[j] += a3 * bv;
          }
        }
      }
      for (; i < M; ++i) {
        T* __restrict c = C + i * ldc + j0;
        for (std::size_t k = k0; k < k0 + kb; ++k) {
          const T a = A[i * lda + k];
          const T* __restrict b = B + k * ldb + j0;
          for (std::size_t j = 0; j < nb; ++j) c[j] += a * b[j];
        }
      }
    }
  }
}

/// Returns the [cols, rows] transpose of a row-major [rows, cols] block.
template <typename T>
std::vector<T> transpose(const T* src, std::size_t rows, std::size_t cols) {
  std::vector<T> out(rows * cols);
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::size_t r1 = std::min(rows, r0 + kTile);
      const std::size_t c1 = std::min(cols, c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) out[c * rows + r] = src[r * cols + c];
      }
    }
  }
  return out;
}

}  // namespace wafer::core::detail
