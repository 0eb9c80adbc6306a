// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <string>
#include <utility>

#include "urae/error.hpp"
#include "urae/kernels.hpp"
#include "urae/tensor.hpp"

namespace urae {

std::string to_string(Shape shape) {
  return "(" + std::to_string(shape.rows) + "x" + std::to_string(shape.cols) + ")";
}

namespace {

void check_finite(const std::vector<double>& data, std::size_t cols) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw NumericalError("non-finite matrix entry at (" + std::to_string(i / cols) + "," +
                           std::to_string(i % cols) + ")");
    }
  }
}

void require_same_shape(const WeightMatrix& a, const WeightMatrix& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

}  // namespace

WeightMatrix::WeightMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

WeightMatrix::WeightMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                     " does not match shape " + to_string({rows, cols}));
  }
  check_finite(data_, cols_);
}

WeightMatrix::WeightMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  check_finite(data_, cols_);
}

WeightMatrix WeightMatrix::zeros(std::size_t rows, std::size_t cols) {
  return WeightMatrix(rows, cols);
}

WeightMatrix WeightMatrix::identity(std::size_t n) {
  WeightMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

WeightMatrix WeightMatrix::diagonal(std::span<const double> values) {
  WeightMatrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  check_finite(m.data_, m.cols_);
  return m;
}

WeightMatrix WeightMatrix::column(std::span<const double> values) {
  return WeightMatrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

WeightMatrix WeightMatrix::transpose() const {
  WeightMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

WeightMatrix WeightMatrix::block(std::size_t r0, std::size_t c0, std::size_t nr,
                                 std::size_t nc) const {
  if (r0 + nr > rows_ || c0 + nc > cols_) {
    throw ShapeError("block [" + std::to_string(r0) + "+" + std::to_string(nr) + ", " +
                     std::to_string(c0) + "+" + std::to_string(nc) + "] outside " +
                     to_string(shape()));
  }
  WeightMatrix b(nr, nc);
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t c = 0; c < nc; ++c) b(r, c) = (*this)(r0 + r, c0 + c);
  }
  return b;
}

WeightMatrix& WeightMatrix::operator+=(const WeightMatrix& other) {
  require_same_shape(*this, other, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

WeightMatrix& WeightMatrix::operator-=(const WeightMatrix& other) {
  require_same_shape(*this, other, "subtract");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

WeightMatrix& WeightMatrix::operator*=(double s) noexcept {
  for (double& x : data_) x *= s;
  return *this;
}

WeightMatrix matmul(const WeightMatrix& a, const WeightMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  }
  WeightMatrix c(a.rows(), b.cols());
  if (c.empty()) return c;
  kernels::active().gemm_nn(a.rows(), b.cols(), a.cols(), a.data().data(), a.cols(),
                            b.data().data(), b.cols(), c.data().data(), c.cols(), false);
  return c;
}

double frob_norm(const WeightMatrix& w) { return std::sqrt(kernels::sum_squares(w.data())); }

WeightMatrix reconstruct(const SvdFactorization& f) {
  WeightMatrix us = f.u;
  for (std::size_t r = 0; r < us.rows(); ++r) {
    for (std::size_t c = 0; c < us.cols(); ++c) us(r, c) *= f.s[c];
  }
  return matmul(us, f.v);
}

}  // namespace urae
