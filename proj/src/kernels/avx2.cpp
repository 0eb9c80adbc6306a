// SPDX-License-Identifier: Apache-2.0
//
// AVX2 + FMA kernels. Functions carry a per-function target attribute rather
// than compiling the whole TU with -mavx2, so no inline helper from a shared
// header can leak AVX instructions into code that runs on older CPUs.

#include "urae/kernels.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define URAE_HAVE_AVX2_KERNELS 1
#include <immintrin.h>
#endif

namespace urae::kernels::detail {

#if defined(URAE_HAVE_AVX2_KERNELS)

#define URAE_AVX2 __attribute__((target("avx2,fma")))

namespace {

URAE_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

URAE_AVX2 double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

URAE_AVX2 double sum_squares(const double* x, std::size_t n) { return dot(x, x, n); }

URAE_AVX2 void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

URAE_AVX2 void rotate(double* x, double* y, std::size_t n, double c, double s) {
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xi = _mm256_loadu_pd(x + i);
    const __m256d yi = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(x + i, _mm256_fmsub_pd(vc, xi, _mm256_mul_pd(vs, yi)));
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(vs, xi, _mm256_mul_pd(vc, yi)));
  }
  for (; i < n; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

// One output row of C += A_row * B, where A_row[p] = a[p * a_step]. Columns
// are processed in 16-wide register blocks, then 4-wide, then scalar.
URAE_AVX2 void gemm_row(std::size_t n, std::size_t k, const double* a, std::size_t a_step,
                        const double* b, std::size_t ldb, double* ci, bool accumulate) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) {
    __m256d c0 = accumulate ? _mm256_loadu_pd(ci + j) : _mm256_setzero_pd();
    __m256d c1 = accumulate ? _mm256_loadu_pd(ci + j + 4) : _mm256_setzero_pd();
    __m256d c2 = accumulate ? _mm256_loadu_pd(ci + j + 8) : _mm256_setzero_pd();
    __m256d c3 = accumulate ? _mm256_loadu_pd(ci + j + 12) : _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d av = _mm256_set1_pd(a[p * a_step]);
      const double* bp = b + p * ldb + j;
      c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp), c0);
      c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + 4), c1);
      c2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + 8), c2);
      c3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + 12), c3);
    }
    _mm256_storeu_pd(ci + j, c0);
    _mm256_storeu_pd(ci + j + 4, c1);
    _mm256_storeu_pd(ci + j + 8, c2);
    _mm256_storeu_pd(ci + j + 12, c3);
  }
  for (; j + 4 <= n; j += 4) {
    __m256d c0 = accumulate ? _mm256_loadu_pd(ci + j) : _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
      c0 = _mm256_fmadd_pd(_mm256_set1_pd(a[p * a_step]), _mm256_loadu_pd(b + p * ldb + j), c0);
    }
    _mm256_storeu_pd(ci + j, c0);
  }
  for (; j < n; ++j) {
    double s = accumulate ? ci[j] : 0.0;
    for (std::size_t p = 0; p < k; ++p) s += a[p * a_step] * b[p * ldb + j];
    ci[j] = s;
  }
}

URAE_AVX2 void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
                       std::size_t lda, const double* b, std::size_t ldb, double* c,
                       std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) gemm_row(n, k, a + i * lda, 1, b, ldb, c + i * ldc, accumulate);
}

URAE_AVX2 void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
                       std::size_t lda, const double* b, std::size_t ldb, double* c,
                       std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) gemm_row(n, k, a + i, lda, b, ldb, c + i * ldc, accumulate);
}

URAE_AVX2 void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
                       std::size_t lda, const double* b, std::size_t ldb, double* c,
                       std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double s = dot(a + i * lda, b + j * ldb, k);
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + s : s;
    }
  }
}

constexpr KernelTable kAvx2{
    Backend::Avx2, dot, sum_squares, axpy, rotate, gemm_nn, gemm_tn, gemm_nt,
};

}  // namespace

const KernelTable* avx2_table() noexcept { return &kAvx2; }

#else

const KernelTable* avx2_table() noexcept { return nullptr; }

#endif

}  // namespace urae::kernels::detail
