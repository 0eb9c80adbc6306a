// SPDX-License-Identifier: Apache-2.0

#include "urae/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "urae/error.hpp"
#include "urae/rng.hpp"

namespace urae::adapters {

std::string_view to_string(AdapterMode mode) noexcept {
  switch (mode) {
    case AdapterMode::Lora:
      return "lora";
    case AdapterMode::MinorSvd:
      return "minor-svd";
    case AdapterMode::MajorSvd:
      return "major-svd";
  }
  return "unknown";
}

std::optional<AdapterMode> parse_mode(std::string_view text) noexcept {
  if (text == "lora") return AdapterMode::Lora;
  if (text == "minor-svd" || text == "minor") return AdapterMode::MinorSvd;
  if (text == "major-svd" || text == "major") return AdapterMode::MajorSvd;
  return std::nullopt;
}

WeightMatrix AdapterPair::product() const { return matmul(a, b); }

namespace {

void check_rank(Shape shape, std::size_t rank) {
  const std::size_t c = std::min(shape.rows, shape.cols);
  if (rank > c) {
    throw RankError("rank " + std::to_string(rank) + " exceeds min dimension " +
                    std::to_string(c) + " of " + to_string(shape));
  }
}

// Builds U[:, idx] diag(S[idx]) V[idx, :] over the index range [begin, end).
WeightMatrix partial_product(const SvdFactorization& f, std::size_t begin, std::size_t end) {
  const std::size_t k = end - begin;
  WeightMatrix us(f.u.rows(), k);
  for (std::size_t r = 0; r < f.u.rows(); ++r) {
    for (std::size_t j = 0; j < k; ++j) us(r, j) = f.u(r, begin + j) * f.s[begin + j];
  }
  return matmul(us, f.v.block(begin, 0, k, f.v.cols()));
}

// A = U[:, idx] sqrt(S[idx]), B = sqrt(S[idx]) V[idx, :].
AdapterPair sqrt_factors(const SvdFactorization& f, std::size_t begin, std::size_t end,
                         AdapterMode mode, Shape shape) {
  const std::size_t r = end - begin;
  AdapterPair out{WeightMatrix(shape.rows, r), WeightMatrix(r, shape.cols), r, mode, shape};
  for (std::size_t j = 0; j < r; ++j) {
    const double root = std::sqrt(f.s[begin + j]);
    for (std::size_t i = 0; i < shape.rows; ++i) out.a(i, j) = f.u(i, begin + j) * root;
    for (std::size_t c = 0; c < shape.cols; ++c) out.b(j, c) = root * f.v(begin + j, c);
  }
  return out;
}

}  // namespace

SplitResult split_minor(const WeightMatrix& w, std::size_t rank) {
  check_rank(w.shape(), rank);
  if (rank == 0) {
    return {w, AdapterPair{WeightMatrix(w.rows(), 0), WeightMatrix(0, w.cols()), 0,
                           AdapterMode::MinorSvd, w.shape()}};
  }
  const SvdFactorization f = svd(w);
  const std::size_t c = f.s.size();
  return {partial_product(f, 0, c - rank),
          sqrt_factors(f, c - rank, c, AdapterMode::MinorSvd, w.shape())};
}

SplitResult split_major(const WeightMatrix& w, std::size_t rank) {
  check_rank(w.shape(), rank);
  if (rank == 0) {
    return {w, AdapterPair{WeightMatrix(w.rows(), 0), WeightMatrix(0, w.cols()), 0,
                           AdapterMode::MajorSvd, w.shape()}};
  }
  const SvdFactorization f = svd(w);
  const std::size_t c = f.s.size();
  return {partial_product(f, rank, c), sqrt_factors(f, 0, rank, AdapterMode::MajorSvd, w.shape())};
}

AdapterPair init_lora(Shape shape, std::size_t rank, std::uint64_t seed) {
  if (rank == 0) throw RankError("init_lora: rank must be at least 1");
  check_rank(shape, rank);
  Rng rng = make_rng(seed, Stream::Lora);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(rank)));
  std::vector<double> a(shape.rows * rank);
  for (double& x : a) x = normal(rng);
  return {WeightMatrix(shape.rows, rank, std::move(a)), WeightMatrix(rank, shape.cols), rank,
          AdapterMode::Lora, shape};
}

namespace {

void check_adapter(const WeightMatrix& base, const AdapterPair& adapter) {
  if (adapter.base_shape != base.shape()) {
    throw ShapeError("adapter built for " + to_string(adapter.base_shape) +
                     " applied to base " + to_string(base.shape()));
  }
  if (adapter.a.shape() != Shape{base.rows(), adapter.rank} ||
      adapter.b.shape() != Shape{adapter.rank, base.cols()}) {
    throw ShapeError("adapter factors " + to_string(adapter.a.shape()) + " / " +
                     to_string(adapter.b.shape()) + " inconsistent with rank " +
                     std::to_string(adapter.rank));
  }
}

}  // namespace

WeightMatrix adapter_forward(const WeightMatrix& x, const WeightMatrix& base,
                             const AdapterPair& adapter) {
  check_adapter(base, adapter);
  if (x.cols() != base.rows()) {
    throw ShapeError("adapter_forward: input " + to_string(x.shape()) +
                     " does not match base " + to_string(base.shape()));
  }
  WeightMatrix y = matmul(x, base);
  y += matmul(matmul(x, adapter.a), adapter.b);
  return y;
}

WeightMatrix merge(const WeightMatrix& base, const AdapterPair& adapter) {
  check_adapter(base, adapter);
  return base + adapter.product();
}

}  // namespace urae::adapters
