// SPDX-License-Identifier: Apache-2.0
//
// Double-precision inner-loop kernels. Every kernel has a scalar reference
// implementation; vector variants (AVX2+FMA on x86-64, NEON on AArch64) are
// selected once at startup from CPU features, and can be pinned with the
// URAE_KERNELS environment variable (scalar | avx2 | neon | auto).
//
// Vector variants reassociate sums and fuse multiply-adds, so they agree
// with the reference to rounding, not bitwise. Within one backend every
// kernel is deterministic.

#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace urae::kernels {

enum class Backend { Scalar, Avx2, Neon };

[[nodiscard]] std::string_view name(Backend backend) noexcept;

struct KernelTable {
  Backend backend;

  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // (x, y) <- (c*x - s*y, s*x + c*y)
  void (*rotate)(double* x, double* y, std::size_t n, double c, double s);

  // Row-major products. `accumulate` selects C += ... over C = ...
  // gemm_nn: C(m,n) = A(m,k) B(k,n)
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc, bool accumulate);
  // gemm_tn: C(m,n) = A(k,m)^T B(k,n)
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc, bool accumulate);
  // gemm_nt: C(m,n) = A(m,k) B(n,k)^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc, bool accumulate);
};

[[nodiscard]] bool available(Backend backend) noexcept;

// Throws ContractError when the backend is not compiled in or the CPU lacks it.
[[nodiscard]] const KernelTable& table(Backend backend);

// The process-wide selection; resolved on first call and immutable after.
[[nodiscard]] const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline double sum_squares(std::span<const double> x) {
  return active().sum_squares(x.data(), x.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

namespace detail {
// Backend entry points; defined in the per-ISA translation units.
const KernelTable& scalar_table() noexcept;
const KernelTable* avx2_table() noexcept;  // nullptr when not compiled in
const KernelTable* neon_table() noexcept;  // nullptr when not compiled in
}  // namespace detail

}  // namespace urae::kernels
