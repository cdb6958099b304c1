#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <vector>

namespace biowish {

// Dense row-major n-d array. Activation tensors use channel-last order
// (n, h, w, c); matrices are (rows, cols).
template <typename S>
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<S> v;

  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> s) : shape(std::move(s)) {
    v.assign(static_cast<std::size_t>(numel(shape)), S(0));
  }

  static std::int64_t numel(const std::vector<std::int64_t>& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(v.size()); }

  S* data() { return v.data(); }
  const S* data() const { return v.data(); }

  void zero() { std::fill(v.begin(), v.end(), S(0)); }

  S& at4(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c) {
    return v[static_cast<std::size_t>(((n * shape[1] + h) * shape[2] + w) * shape[3] + c)];
  }
  const S& at4(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c) const {
    return v[static_cast<std::size_t>(((n * shape[1] + h) * shape[2] + w) * shape[3] + c)];
  }
};

// C (M x N) += A (M x K) * B (K x N), all row-major. The i-unrolled axpy
// form reuses each loaded B row four times; with -O3 the j loop vectorizes
// to FMA over contiguous memory.
template <typename S>
void gemm_nn(std::int64_t M, std::int64_t K, std::int64_t N,
             const S* A, const S* B, S* C) {
  std::int64_t i = 0;
  for (; i + 4 <= M; i += 4) {
    S* c0 = C + (i + 0) * N;
    S* c1 = C + (i + 1) * N;
    S* c2 = C + (i + 2) * N;
    S* c3 = C + (i + 3) * N;
    for (std::int64_t k = 0; k < K; ++k) {
      const S a0 = A[(i + 0) * K + k];
      const S a1 = A[(i + 1) * K + k];
      const S a2 = A[(i + 2) * K + k];
      const S a3 = A[(i + 3) * K + k];
      const S* b = B + k * N;
      for (std::int64_t j = 0; j < N; ++j) {
        c0[j] += a0 * b[j];
        c1[j] += a1 * b[j];
        c2[j] += a2 * b[j];
        c3[j] += a3 * b[j];
      }
    }
  }
  for (; i < M; ++i) {
    S* c0 = C + i * N;
    for (std::int64_t k = 0; k < K; ++k) {
      const S a0 = A[i * K + k];
      const S* b = B + k * N;
      for (std::int64_t j = 0; j < N; ++j) c0[j] += a0 * b[j];
    }
  }
}

// C (M x N) += A (M x K) * B^T, where B is (N x K) row-major.
template <typename S>
void gemm_nt(std::int64_t M, std::int64_t K, std::int64_t N,
             const S* A, const S* B, S* C) {
  for (std::int64_t i = 0; i < M; ++i) {
    const S* a = A + i * K;
    S* c = C + i * N;
    std::int64_t j = 0;
    for (; j + 4 <= N; j += 4) {
      const S* b0 = B + (j + 0) * K;
      const S* b1 = B + (j + 1) * K;
      const S* b2 = B + (j + 2) * K;
      const S* b3 = B + (j + 3) * K;
      S s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      for (std::int64_t k = 0; k < K; ++k) {
        s0 += a[k] * b0[k];
        s1 += a[k] * b1[k];
        s2 += a[k] * b2[k];
        s3 += a[k] * b3[k];
      }
      c[j + 0] += s0;
      c[j + 1] += s1;
      c[j + 2] += s2;
      c[j + 3] += s3;
    }
    for (; j < N; ++j) {
      const S* b = B + j * K;
      S s = 0;
      for (std::int64_t k = 0; k < K; ++k) s += a[k] * b[k];
      c[j] += s;
    }
  }
}

// C (K x N) += A^T * B, where A is (M x K) and B is (M x N), row-major.
// Accumulates rank-1 updates; four A/B rows per pass to amortize C traffic.
template <typename S>
void gemm_tn(std::int64_t M, std::int64_t K, std::int64_t N,
             const S* A, const S* B, S* C) {
  std::int64_t i = 0;
  for (; i + 4 <= M; i += 4) {
    const S* a0 = A + (i + 0) * K;
    const S* a1 = A + (i + 1) * K;
    const S* a2 = A + (i + 2) * K;
    const S* a3 = A + (i + 3) * K;
    const S* b0 = B + (i + 0) * N;
    const S* b1 = B + (i + 1) * N;
    const S* b2 = B + (i + 2) * N;
    const S* b3 = B + (i + 3) * N;
    for (std::int64_t p = 0; p < K; ++p) {
      const S w0 = a0[p], w1 = a1[p], w2 = a2[p], w3 = a3[p];
      S* c = C + p * N;
      for (std::int64_t q = 0; q < N; ++q)
        c[q] += w0 * b0[q] + w1 * b1[q] + w2 * b2[q] + w3 * b3[q];
    }
  }
  for (; i < M; ++i) {
    const S* a = A + i * K;
    const S* b = B + i * N;
    for (std::int64_t p = 0; p < K; ++p) {
      const S w = a[p];
      S* c = C + p * N;
      for (std::int64_t q = 0; q < N; ++q) c[q] += w * b[q];
    }
  }
}

}  // namespace biowish
