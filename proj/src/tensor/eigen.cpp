// SPDX-License-Identifier: Apache-2.0
//
// Cyclic Jacobi eigensolver for small dense symmetric matrices.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "urae/error.hpp"
#include "urae/tensor.hpp"

namespace urae {
namespace {

constexpr int kMaxSweeps = 100;
constexpr double kSymmetryTol = 1e-10;

void require_symmetric(const WeightMatrix& m) {
  if (m.rows() != m.cols()) {
    throw ContractError("sym_eigen: matrix is not square " + to_string(m.shape()));
  }
  double scale = 1.0;
  for (double x : m.data()) scale = std::max(scale, std::abs(x));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - m(j, i)) > kSymmetryTol * scale) {
        throw ContractError("sym_eigen: matrix is not symmetric at (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
      }
    }
  }
}

}  // namespace

SymmetricEigen sym_eigen(const WeightMatrix& input) {
  require_symmetric(input);
  const std::size_t n = input.rows();
  // Work on the symmetrized copy so tiny asymmetries do not bias the result.
  WeightMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (input(i, j) + input(j, i));
  }
  WeightMatrix v = WeightMatrix::identity(n);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    }
    return std::sqrt(s);
  };
  double total = 0.0;
  for (double x : a.data()) total += x * x;
  total = std::sqrt(total);

  bool converged = n < 2 || off_norm() == 0.0;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(1.0, theta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = off_norm() <= 1e-15 * total;
  }
  if (!converged) {
    throw NumericalError("sym_eigen: no convergence after " + std::to_string(kMaxSweeps) +
                         " sweeps for matrix " + to_string(input.shape()));
  }

  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return diag[x] > diag[y]; });

  double max_abs = 0.0;
  for (double d : diag) max_abs = std::max(max_abs, std::abs(d));

  SymmetricEigen out{std::vector<double>(n), WeightMatrix(n, n)};
  for (std::size_t jj = 0; jj < n; ++jj) {
    const double lambda = diag[order[jj]];
    out.values[jj] = std::abs(lambda) <= kEigenRankCut * max_abs ? 0.0 : lambda;
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, jj) = v(k, order[jj]);
  }
  return out;
}

std::vector<double> sym_eigvals(const WeightMatrix& m) { return sym_eigen(m).values; }

}  // namespace urae
