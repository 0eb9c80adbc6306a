// SPDX-License-Identifier: Apache-2.0
//
// AArch64 NEON kernels (float64x2). NEON is baseline on AArch64, so no
// runtime feature probe is needed there.

#include "urae/kernels.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)
#define URAE_HAVE_NEON_KERNELS 1
#include <arm_neon.h>
#endif

namespace urae::kernels::detail {

#if defined(URAE_HAVE_NEON_KERNELS)

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  float64x2_t acc2 = vdupq_n_f64(0.0);
  float64x2_t acc3 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    acc2 = vfmaq_f64(acc2, vld1q_f64(a + i + 4), vld1q_f64(b + i + 4));
    acc3 = vfmaq_f64(acc3, vld1q_f64(a + i + 6), vld1q_f64(b + i + 6));
  }
  for (; i + 2 <= n; i += 2) acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
  double s = vaddvq_f64(vaddq_f64(vaddq_f64(acc0, acc1), vaddq_f64(acc2, acc3)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_squares(const double* x, std::size_t n) { return dot(x, x, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void rotate(double* x, double* y, std::size_t n, double c, double s) {
  const float64x2_t vc = vdupq_n_f64(c);
  const float64x2_t vs = vdupq_n_f64(s);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t xi = vld1q_f64(x + i);
    const float64x2_t yi = vld1q_f64(y + i);
    vst1q_f64(x + i, vfmsq_f64(vmulq_f64(vc, xi), vs, yi));
    vst1q_f64(y + i, vfmaq_f64(vmulq_f64(vc, yi), vs, xi));
  }
  for (; i < n; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

void gemm_row(std::size_t n, std::size_t k, const double* a, std::size_t a_step,
              const double* b, std::size_t ldb, double* ci, bool accumulate) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    float64x2_t c0 = accumulate ? vld1q_f64(ci + j) : vdupq_n_f64(0.0);
    float64x2_t c1 = accumulate ? vld1q_f64(ci + j + 2) : vdupq_n_f64(0.0);
    float64x2_t c2 = accumulate ? vld1q_f64(ci + j + 4) : vdupq_n_f64(0.0);
    float64x2_t c3 = accumulate ? vld1q_f64(ci + j + 6) : vdupq_n_f64(0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const float64x2_t av = vdupq_n_f64(a[p * a_step]);
      const double* bp = b + p * ldb + j;
      c0 = vfmaq_f64(c0, av, vld1q_f64(bp));
      c1 = vfmaq_f64(c1, av, vld1q_f64(bp + 2));
      c2 = vfmaq_f64(c2, av, vld1q_f64(bp + 4));
      c3 = vfmaq_f64(c3, av, vld1q_f64(bp + 6));
    }
    vst1q_f64(ci + j, c0);
    vst1q_f64(ci + j + 2, c1);
    vst1q_f64(ci + j + 4, c2);
    vst1q_f64(ci + j + 6, c3);
  }
  for (; j < n; ++j) {
    double s = accumulate ? ci[j] : 0.0;
    for (std::size_t p = 0; p < k; ++p) s += a[p * a_step] * b[p * ldb + j];
    ci[j] = s;
  }
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) gemm_row(n, k, a + i * lda, 1, b, ldb, c + i * ldc, accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) gemm_row(n, k, a + i, lda, b, ldb, c + i * ldc, accumulate);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double s = dot(a + i * lda, b + j * ldb, k);
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + s : s;
    }
  }
}

constexpr KernelTable kNeon{
    Backend::Neon, dot, sum_squares, axpy, rotate, gemm_nn, gemm_tn, gemm_nt,
};

}  // namespace

const KernelTable* neon_table() noexcept { return &kNeon; }

#else

const KernelTable* neon_table() noexcept { return nullptr; }

#endif

}  // namespace urae::kernels::detail
