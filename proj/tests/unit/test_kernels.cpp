// SPDX-License-Identifier: Apache-2.0
//
// Every compiled-in SIMD backend against the scalar reference.

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "urae/kernels.hpp"

using namespace urae::kernels;

namespace {

std::vector<double> rnd(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

std::vector<Backend> simd_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::Avx2, Backend::Neon}) {
    if (available(b)) out.push_back(b);
  }
  return out;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return m;
}

const std::size_t kLengths[] = {0, 1, 2, 3, 4, 5, 7, 8, 15, 16, 17, 31, 33, 64, 100, 257};

}  // namespace

TEST(Kernels, ScalarAlwaysAvailable) {
  EXPECT_TRUE(available(Backend::Scalar));
  EXPECT_EQ(table(Backend::Scalar).backend, Backend::Scalar);
  EXPECT_TRUE(available(active().backend));
}

TEST(Kernels, ReductionsMatchScalar) {
  const auto& ref = table(Backend::Scalar);
  for (Backend b : simd_backends()) {
    const auto& k = table(b);
    for (std::size_t n : kLengths) {
      const auto x = rnd(n, n);
      const auto y = rnd(n, n + 1000);
      const double d0 = ref.dot(x.data(), y.data(), n);
      EXPECT_NEAR(k.dot(x.data(), y.data(), n), d0, 1e-13 * (1.0 + n)) << name(b) << " n=" << n;
      const double s0 = ref.sum_squares(x.data(), n);
      EXPECT_NEAR(k.sum_squares(x.data(), n), s0, 1e-13 * (1.0 + s0)) << name(b) << " n=" << n;
    }
  }
}

TEST(Kernels, ElementwiseMatchScalarExactly) {
  const auto& ref = table(Backend::Scalar);
  for (Backend b : simd_backends()) {
    const auto& k = table(b);
    for (std::size_t n : kLengths) {
      const auto x = rnd(n, 1 + n);
      auto y0 = rnd(n, 2 + n);
      auto y1 = y0;
      ref.axpy(0.37, x.data(), y0.data(), n);
      k.axpy(0.37, x.data(), y1.data(), n);
      // FMA may round once where scalar rounds twice.
      EXPECT_LE(max_rel(y1, y0), 1e-15) << name(b) << " n=" << n;

      auto a0 = rnd(n, 3 + n), c0 = rnd(n, 4 + n);
      auto a1 = a0, c1 = c0;
      ref.rotate(a0.data(), c0.data(), n, 0.8, 0.6);
      k.rotate(a1.data(), c1.data(), n, 0.8, 0.6);
      EXPECT_LE(max_rel(a1, a0), 1e-15);
      EXPECT_LE(max_rel(c1, c0), 1e-15);
    }
  }
}

TEST(Kernels, GemmVariantsMatchScalar) {
  const auto& ref = table(Backend::Scalar);
  for (Backend b : simd_backends()) {
    const auto& k = table(b);
    for (std::size_t m : {1u, 3u, 8u}) {
      for (std::size_t n : {1u, 4u, 15u, 16u, 17u, 40u}) {
        for (std::size_t kk : {1u, 2u, 9u, 34u}) {
          for (bool acc : {false, true}) {
            const auto a = rnd(m * kk, m + 7 * n);
            const auto bb = rnd(kk * n, kk + 5 * n);
            const auto init = rnd(m * n, m * n + 3);
            const auto at = rnd(kk * m, 11 * m + n);  // k x m for TN
            const auto bt = rnd(n * kk, 13 * n + kk);  // n x k for NT

            auto c0 = init, c1 = init;
            ref.gemm_nn(m, n, kk, a.data(), kk, bb.data(), n, c0.data(), n, acc);
            k.gemm_nn(m, n, kk, a.data(), kk, bb.data(), n, c1.data(), n, acc);
            EXPECT_LE(max_rel(c1, c0), 1e-13) << "nn " << name(b);

            c0 = init, c1 = init;
            ref.gemm_tn(m, n, kk, at.data(), m, bb.data(), n, c0.data(), n, acc);
            k.gemm_tn(m, n, kk, at.data(), m, bb.data(), n, c1.data(), n, acc);
            EXPECT_LE(max_rel(c1, c0), 1e-13) << "tn " << name(b);

            c0 = init, c1 = init;
            ref.gemm_nt(m, n, kk, a.data(), kk, bt.data(), kk, c0.data(), n, acc);
            k.gemm_nt(m, n, kk, a.data(), kk, bt.data(), kk, c1.data(), n, acc);
            EXPECT_LE(max_rel(c1, c0), 1e-13) << "nt " << name(b);
          }
        }
      }
    }
  }
}

TEST(Kernels, ScalarGemmAgainstDefinition) {
  const auto& ref = table(Backend::Scalar);
  const std::size_t m = 3, n = 5, k = 4;
  const auto a = rnd(m * k, 1), b = rnd(k * n, 2);
  std::vector<double> c(m * n, 1.0);
  ref.gemm_nn(m, n, k, a.data(), k, b.data(), n, c.data(), n, true);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 1.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      EXPECT_NEAR(c[i * n + j], s, 1e-14);
    }
  }
}
