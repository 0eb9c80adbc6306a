// SPDX-License-Identifier: Apache-2.0
//
// Dense double-precision matrices and the handful of factorizations the rest
// of the library is built on: product, SVD with descending singular values,
// symmetric eigendecomposition, Frobenius norm.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace urae {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  friend bool operator==(const Shape&, const Shape&) = default;
};

[[nodiscard]] std::string to_string(Shape shape);

// Row-major dense matrix. Entries are finite by construction; zero-extent
// shapes (0 x n, n x 0) are legal and represent empty factors.
class WeightMatrix {
 public:
  WeightMatrix() = default;
  WeightMatrix(std::size_t rows, std::size_t cols);  // zero-filled
  WeightMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  WeightMatrix(std::initializer_list<std::initializer_list<double>> rows);

  [[nodiscard]] static WeightMatrix zeros(std::size_t rows, std::size_t cols);
  [[nodiscard]] static WeightMatrix identity(std::size_t n);
  [[nodiscard]] static WeightMatrix diagonal(std::span<const double> values);
  [[nodiscard]] static WeightMatrix column(std::span<const double> values);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] Shape shape() const noexcept { return {rows_, cols_}; }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  [[nodiscard]] double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }
  [[nodiscard]] double& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols_ + c];
  }

  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }
  [[nodiscard]] std::span<double> row(std::size_t r) noexcept {
    return std::span<double>(data_).subspan(r * cols_, cols_);
  }

  [[nodiscard]] WeightMatrix transpose() const;
  // Rows [r0, r0+nr) x cols [c0, c0+nc).
  [[nodiscard]] WeightMatrix block(std::size_t r0, std::size_t c0, std::size_t nr,
                                   std::size_t nc) const;

  WeightMatrix& operator+=(const WeightMatrix& other);
  WeightMatrix& operator-=(const WeightMatrix& other);
  WeightMatrix& operator*=(double s) noexcept;

  friend WeightMatrix operator+(WeightMatrix a, const WeightMatrix& b) { return a += b; }
  friend WeightMatrix operator-(WeightMatrix a, const WeightMatrix& b) { return a -= b; }
  friend WeightMatrix operator*(WeightMatrix a, double s) { return a *= s; }
  friend WeightMatrix operator*(double s, WeightMatrix a) { return a *= s; }

  // Bitwise equality of shape and payload.
  friend bool operator==(const WeightMatrix&, const WeightMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// W = U diag(S) V with U (c_in x c), V (c x c_out), c = min(c_in, c_out).
struct SvdFactorization {
  WeightMatrix u;
  std::vector<double> s;
  WeightMatrix v;
};

struct SymmetricEigen {
  std::vector<double> values;  // descending
  WeightMatrix vectors;        // column j pairs with values[j]
};

[[nodiscard]] WeightMatrix matmul(const WeightMatrix& a, const WeightMatrix& b);

// Deterministic SVD (one-sided Jacobi). Singular values are sorted descending
// with a stable sort; each U column is flipped so its first nonzero entry is
// non-negative. Throws NumericalError if the sweep cap is reached.
[[nodiscard]] SvdFactorization svd(const WeightMatrix& w);

// Eigenvalues of a symmetric matrix, descending. Eigenvalues with
// |lambda| <= 1e-12 * max|lambda| are returned as exactly 0.
[[nodiscard]] std::vector<double> sym_eigvals(const WeightMatrix& m);
[[nodiscard]] SymmetricEigen sym_eigen(const WeightMatrix& m);

[[nodiscard]] double frob_norm(const WeightMatrix& w);

// Relative cut below which an eigenvalue counts as zero.
inline constexpr double kEigenRankCut = 1e-12;

// U diag(S) V, for checking factorizations.
[[nodiscard]] WeightMatrix reconstruct(const SvdFactorization& f);

}  // namespace urae
