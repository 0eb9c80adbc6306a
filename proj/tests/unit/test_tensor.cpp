// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "support.hpp"
#include "urae/error.hpp"
#include "urae/tensor.hpp"

using namespace urae;
using namespace urae::testing;

TEST(WeightMatrix, RejectsNonFinite) {
  EXPECT_THROW(WeightMatrix(1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()}), NumericalError);
  EXPECT_THROW(WeightMatrix(1, 1, {std::numeric_limits<double>::infinity()}), NumericalError);
  EXPECT_THROW(WeightMatrix(2, 2, {1.0, 2.0, 3.0}), ShapeError);
}

TEST(Matmul, IdentityLeavesMatrix) {
  const auto m = random_matrix(3, 5, 1);
  EXPECT_EQ(matmul(WeightMatrix::identity(3), m), m);
}

TEST(Matmul, HandArithmetic) {
  const WeightMatrix a{{1, 2}, {3, 4}};
  const WeightMatrix b{{0}, {1}};
  EXPECT_EQ(matmul(a, b), (WeightMatrix{{2}, {4}}));
}

TEST(Matmul, MatchesTripleLoop) {
  const auto a = random_matrix(5, 4, 2);
  const auto b = random_matrix(4, 3, 3);
  EXPECT_LT(max_abs_diff(matmul(a, b), naive_matmul(a, b)), 1e-12);
  // Sizes that exercise vector bodies and tails.
  for (std::size_t n : {1u, 3u, 4u, 15u, 16u, 17u, 37u}) {
    const auto x = random_matrix(7, 9, 10 + n);
    const auto y = random_matrix(9, n, 20 + n);
    EXPECT_LT(max_abs_diff(matmul(x, y), naive_matmul(x, y)), 1e-12) << n;
  }
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  try {
    (void)matmul(WeightMatrix(2, 3), WeightMatrix(4, 5));
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("4x5"), std::string::npos) << msg;
  }
}

TEST(Matmul, Associative) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = random_matrix(4, 6, 100 + s);
    const auto b = random_matrix(6, 5, 200 + s);
    const auto c = random_matrix(5, 3, 300 + s);
    EXPECT_LT(rel_frob_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))), 1e-9);
  }
}

TEST(Svd, Identity) {
  const auto f = svd(WeightMatrix::identity(3));
  EXPECT_EQ(f.s, (std::vector<double>{1, 1, 1}));
}

TEST(Svd, Diagonal) {
  const auto f = svd(WeightMatrix{{3, 0}, {0, 1}});
  ASSERT_EQ(f.s.size(), 2u);
  EXPECT_NEAR(f.s[0], 3.0, 1e-15);
  EXPECT_NEAR(f.s[1], 1.0, 1e-15);
}

TEST(Svd, ReconstructsRandom4x3) {
  const auto w = random_matrix(4, 3, 7);
  const auto f = svd(w);
  EXPECT_LT(rel_frob_diff(naive_reconstruct(f), w) * std::max(1.0, naive_frob(w)), 1e-10);
}

TEST(Svd, FrozenSingularValues) {
  // numpy.linalg.svd of the same matrix.
  const WeightMatrix a{{1, 2, 3}, {4, 5, 6}, {7, 8, 10}, {-1, 0.5, 2}};
  const std::vector<double> expect = {17.453925186009013, 2.136419423191797, 0.21495964600171655};
  const auto f = svd(a);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LT(rel_diff(f.s[i], expect[i]), 1e-13);
}

TEST(Svd, InvariantsOverShapes) {
  std::uint64_t seed = 50;
  for (std::size_t m : {1u, 2u, 5u, 17u, 64u}) {
    for (std::size_t n : {1u, 3u, 16u, 48u, 64u}) {
      const auto w = random_matrix(m, n, ++seed);
      const auto f = svd(w);
      const std::size_t c = std::min(m, n);
      ASSERT_EQ(f.u.shape(), (Shape{m, c}));
      ASSERT_EQ(f.v.shape(), (Shape{c, n}));
      for (std::size_t i = 0; i + 1 < c; ++i) EXPECT_GE(f.s[i], f.s[i + 1]);
      for (double s : f.s) EXPECT_GE(s, 0.0);
      EXPECT_LE(rel_frob_diff(naive_reconstruct(f), w), 1e-10) << m << "x" << n;
      EXPECT_LE(gram_deviation(f.u, true), 1e-10);
      EXPECT_LE(gram_deviation(f.v, false), 1e-10);
      for (std::size_t j = 0; j < c; ++j) {
        for (std::size_t i = 0; i < m; ++i) {
          if (f.u(i, j) != 0.0) {
            EXPECT_GT(f.u(i, j), 0.0);
            break;
          }
        }
      }
    }
  }
}

TEST(Svd, RankDeficientStillOrthonormal) {
  const auto a = random_matrix(8, 2, 9);
  const auto b = random_matrix(2, 6, 10);
  const auto w = naive_matmul(a, b);  // rank 2
  const auto f = svd(w);
  EXPECT_LT(f.s[2], 1e-12 * f.s[0]);
  EXPECT_LE(rel_frob_diff(naive_reconstruct(f), w), 1e-10);
  EXPECT_LE(gram_deviation(f.u, true), 1e-10);
  EXPECT_LE(gram_deviation(f.v, false), 1e-10);

  const auto z = svd(WeightMatrix(3, 4));
  EXPECT_EQ(z.s, (std::vector<double>{0, 0, 0}));
  EXPECT_LE(gram_deviation(z.u, true), 1e-12);
}

TEST(Svd, Deterministic) {
  const auto w = random_matrix(12, 9, 11);
  const auto a = svd(w);
  const auto b = svd(w);
  EXPECT_EQ(a.u, b.u);
  EXPECT_EQ(a.s, b.s);
  EXPECT_EQ(a.v, b.v);
}

TEST(SymEig, Diagonal) {
  const std::vector<double> d = {2, 4, 0};
  EXPECT_EQ(sym_eigvals(WeightMatrix::diagonal(d)), (std::vector<double>{4, 2, 0}));
}

TEST(SymEig, GramHand) {
  const WeightMatrix phi{{1, 0}, {0, 2}};
  const auto v = sym_eigvals(matmul(phi.transpose(), phi));
  ASSERT_EQ(v.size(), 2u);
  EXPECT_NEAR(v[0], 4.0, 1e-14);
  EXPECT_NEAR(v[1], 1.0, 1e-14);
}

TEST(SymEig, ClosedFormRankTwo) {
  // Phi Phi^T = [[5,2],[2,10]] -> 7.5 +- sqrt(10.25); the third eigenvalue is exactly zero.
  const WeightMatrix phi{{1, 2, 0}, {0, 1, 3}};
  const auto v = sym_eigvals(matmul(phi.transpose(), phi));
  ASSERT_EQ(v.size(), 3u);
  EXPECT_LT(rel_diff(v[0], 7.5 + std::sqrt(10.25)), 1e-13);
  EXPECT_LT(rel_diff(v[1], 7.5 - std::sqrt(10.25)), 1e-13);
  EXPECT_EQ(v[2], 0.0);
}

TEST(SymEig, MatchesSquaredSingularValues) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto phi = random_matrix(8, 5, 400 + s);
    const auto ev = sym_eigvals(naive_matmul(naive_transpose(phi), phi));
    const auto sv = svd(phi).s;
    for (std::size_t i = 0; i < 5; ++i) EXPECT_LT(rel_diff(ev[i], sv[i] * sv[i]), 1e-9);
    // Wide case: 5 nonzero eigenvalues of an 8x8 Gram, 3 exact zeros.
    const auto wide = naive_transpose(phi);
    const auto ev8 = sym_eigvals(naive_matmul(naive_transpose(wide), wide));
    for (std::size_t i = 0; i < 5; ++i) EXPECT_LT(rel_diff(ev8[i], sv[i] * sv[i]), 1e-9);
    for (std::size_t i = 5; i < 8; ++i) EXPECT_EQ(ev8[i], 0.0);
  }
}

TEST(SymEig, EigenvectorsDiagonalize) {
  const auto a = random_matrix(6, 6, 12);
  const auto m = naive_matmul(a, naive_transpose(a));
  const auto e = sym_eigen(m);
  EXPECT_LE(gram_deviation(e.vectors, true), 1e-10);
  for (std::size_t j = 0; j < 6; ++j) {
    for (std::size_t i = 0; i < 6; ++i) {
      double mv = 0.0;
      for (std::size_t k = 0; k < 6; ++k) mv += m(i, k) * e.vectors(k, j);
      EXPECT_NEAR(mv, e.values[j] * e.vectors(i, j), 1e-9 * e.values[0]);
    }
  }
}

TEST(SymEig, RejectsAsymmetricAndNonSquare) {
  EXPECT_THROW((void)sym_eigvals(WeightMatrix{{1, 2}, {0, 1}}), ContractError);
  EXPECT_THROW((void)sym_eigvals(WeightMatrix(2, 3)), ContractError);
}

TEST(FrobNorm, Basics) {
  EXPECT_EQ(frob_norm(WeightMatrix(3, 3)), 0.0);
  EXPECT_EQ(frob_norm(WeightMatrix{{3, 4}}), 5.0);
  const auto w = random_matrix(6, 6, 13);
  EXPECT_LT(rel_diff(frob_norm(w), naive_frob(w)), 1e-12);
}
