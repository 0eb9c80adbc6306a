// SPDX-License-Identifier: Apache-2.0
//
// One-sided (Hestenes) Jacobi SVD. The tall orientation of W is orthogonalized
// column by column with plane rotations; columns are stored as contiguous rows
// of a work matrix so every rotation and inner product is a unit-stride kernel
// call.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "urae/error.hpp"
#include "urae/kernels.hpp"
#include "urae/tensor.hpp"

namespace urae {
namespace {

constexpr int kMaxSweeps = 80;

// Completes rows of `basis` flagged in `missing` to an orthonormal set using
// Gram-Schmidt on standard basis vectors. Two orthogonalization passes.
void complete_orthonormal(std::vector<double>& basis, std::size_t count, std::size_t dim,
                          const std::vector<bool>& missing) {
  const auto& k = kernels::active();
  std::vector<bool> filled(count);
  for (std::size_t j = 0; j < count; ++j) filled[j] = !missing[j];
  std::size_t candidate = 0;
  std::vector<double> v(dim);
  for (std::size_t j = 0; j < count; ++j) {
    if (!missing[j]) continue;
    for (;; ++candidate) {
      if (candidate >= dim) throw NumericalError("svd: failed to complete orthonormal basis");
      std::fill(v.begin(), v.end(), 0.0);
      v[candidate] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < count; ++i) {
          if (!filled[i]) continue;
          const double* bi = basis.data() + i * dim;
          k.axpy(-k.dot(bi, v.data(), dim), bi, v.data(), dim);
        }
      }
      const double norm = std::sqrt(k.sum_squares(v.data(), dim));
      if (norm > 0.5) {
        double* bj = basis.data() + j * dim;
        for (std::size_t t = 0; t < dim; ++t) bj[t] = v[t] / norm;
        filled[j] = true;
        ++candidate;
        break;
      }
    }
  }
}

}  // namespace

SvdFactorization svd(const WeightMatrix& w) {
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();
  const bool wide = m < n;
  // Tall view T (p x q, p >= q) is W or W^T. `work` row j holds column j of T.
  const std::size_t p = wide ? n : m;
  const std::size_t q = wide ? m : n;

  std::vector<double> work(q * p);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (wide) {
        work[r * p + c] = w(r, c);  // column r of W^T is row r of W
      } else {
        work[c * p + r] = w(r, c);
      }
    }
  }
  // Right rotations accumulated as rows: row j is column j of the q x q factor.
  std::vector<double> right(q * q, 0.0);
  for (std::size_t j = 0; j < q; ++j) right[j * q + j] = 1.0;

  const auto& k = kernels::active();
  const double tol = std::numeric_limits<double>::epsilon() * static_cast<double>(std::max<std::size_t>(p, 1));

  bool converged = q < 2;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < q; ++i) {
      for (std::size_t j = i + 1; j < q; ++j) {
        double* gi = work.data() + i * p;
        double* gj = work.data() + j * p;
        const double alpha = k.sum_squares(gi, p);
        const double beta = k.sum_squares(gj, p);
        const double gamma = k.dot(gi, gj, p);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta)) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        k.rotate(gi, gj, p, c, s);
        k.rotate(right.data() + i * q, right.data() + j * q, q, c, s);
        rotated = true;
      }
    }
    converged = !rotated;
  }
  if (!converged) {
    throw NumericalError("svd: no convergence after " + std::to_string(kMaxSweeps) +
                         " sweeps for matrix " + to_string(w.shape()));
  }

  std::vector<double> sigma(q);
  for (std::size_t j = 0; j < q; ++j) sigma[j] = std::sqrt(k.sum_squares(work.data() + j * p, p));
  std::vector<std::size_t> order(q);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  const double sigma_max = q == 0 ? 0.0 : sigma[order[0]];
  const double null_cut = sigma_max * std::numeric_limits<double>::epsilon() * static_cast<double>(p);

  // Left vectors of T in sorted order; null directions are completed.
  std::vector<double> left(q * p);
  std::vector<double> s_sorted(q);
  std::vector<bool> missing(q, false);
  for (std::size_t jj = 0; jj < q; ++jj) {
    const std::size_t j = order[jj];
    double sj = sigma[j];
    if (sj <= null_cut || sj == 0.0) {
      missing[jj] = true;
      sj = 0.0;
    } else {
      const double* g = work.data() + j * p;
      for (std::size_t t = 0; t < p; ++t) left[jj * p + t] = g[t] / sj;
    }
    s_sorted[jj] = sj;
  }
  if (std::any_of(missing.begin(), missing.end(), [](bool b) { return b; })) {
    complete_orthonormal(left, q, p, missing);
  }

  // T = L diag(s) R^T with L (p x q) from `left` rows and R (q x q) from `right` rows.
  SvdFactorization f{WeightMatrix(m, q), std::move(s_sorted), WeightMatrix(q, n)};
  for (std::size_t jj = 0; jj < q; ++jj) {
    const double* l = left.data() + jj * p;
    const double* r = right.data() + order[jj] * q;
    if (!wide) {
      // W = L s R^T: U = L, V = R^T.
      for (std::size_t t = 0; t < m; ++t) f.u(t, jj) = l[t];
      for (std::size_t t = 0; t < n; ++t) f.v(jj, t) = r[t];
    } else {
      // W^T = L s R^T, so W = R s L^T: U = R, V = L^T.
      for (std::size_t t = 0; t < m; ++t) f.u(t, jj) = r[t];
      for (std::size_t t = 0; t < n; ++t) f.v(jj, t) = l[t];
    }
  }

  // Sign convention: first nonzero entry of each U column is non-negative.
  for (std::size_t jj = 0; jj < q; ++jj) {
    for (std::size_t t = 0; t < m; ++t) {
      const double x = f.u(t, jj);
      if (x == 0.0) continue;
      if (x < 0.0) {
        for (std::size_t r = 0; r < m; ++r) f.u(r, jj) = -f.u(r, jj);
        for (std::size_t c = 0; c < n; ++c) f.v(jj, c) = -f.v(jj, c);
      }
      break;
    }
  }
  return f;
}

}  // namespace urae
