// SPDX-License-Identifier: Apache-2.0
//
// Test-side oracles: naive implementations that share no code with the library.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "urae/tensor.hpp"

namespace urae::testing {

inline WeightMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                  double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = normal(rng);
  return WeightMatrix(rows, cols, std::move(v));
}

inline WeightMatrix naive_matmul(const WeightMatrix& a, const WeightMatrix& b) {
  WeightMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0.0L;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
      c(i, j) = static_cast<double>(s);
    }
  }
  return c;
}

inline double naive_frob(const WeightMatrix& a) {
  long double s = 0.0L;
  for (double x : a.data()) s += static_cast<long double>(x) * x;
  return static_cast<double>(std::sqrt(s));
}

inline double max_abs_diff(const WeightMatrix& a, const WeightMatrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

inline double rel_frob_diff(const WeightMatrix& a, const WeightMatrix& b) {
  WeightMatrix d(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) d.data()[i] = a.data()[i] - b.data()[i];
  return naive_frob(d) / std::max(1.0, naive_frob(b));
}

inline WeightMatrix naive_transpose(const WeightMatrix& a) {
  WeightMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

// max |G - I| for G = X^T X (columns) or X X^T (rows).
inline double gram_deviation(const WeightMatrix& x, bool columns) {
  const WeightMatrix g = columns ? naive_matmul(naive_transpose(x), x) : naive_matmul(x, naive_transpose(x));
  double m = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) m = std::max(m, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  return m;
}

// U diag(S) V with naive products.
inline WeightMatrix naive_reconstruct(const SvdFactorization& f) {
  WeightMatrix us = f.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= f.s[j];
  return naive_matmul(us, f.v);
}

inline WeightMatrix naive_add(const WeightMatrix& a, const WeightMatrix& b) {
  WeightMatrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) + b(i, j);
  return c;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace urae::testing
