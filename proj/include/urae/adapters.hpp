// SPDX-License-Identifier: Apache-2.0
//
// Low-rank adapters on a frozen weight W (c_in x c_out), forward Y = X W + X A B.
//
//   LoRA      A ~ N(0, 1/r), B = 0; the adapted map starts at X W.
//   MinorSvd  A, B carry the r smallest singular triplets of W as
//             A = U[:, -r:] sqrt(S), B = sqrt(S) V[-r:, :]; the frozen base
//             becomes the residual built from the remaining triplets.
//   MajorSvd  the same split using the r largest triplets.
//
// No alpha/r scale is applied to the adapter branch.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "urae/tensor.hpp"

namespace urae::adapters {

enum class AdapterMode { Lora, MinorSvd, MajorSvd };

[[nodiscard]] std::string_view to_string(AdapterMode mode) noexcept;
[[nodiscard]] std::optional<AdapterMode> parse_mode(std::string_view text) noexcept;

struct AdapterPair {
  WeightMatrix a;  // c_in x r
  WeightMatrix b;  // r x c_out
  std::size_t rank = 0;
  AdapterMode mode = AdapterMode::Lora;
  Shape base_shape;

  // r * (c_in + c_out)
  [[nodiscard]] std::size_t parameter_count() const noexcept { return a.size() + b.size(); }
  // A B, materialized. Only for inspection and merging.
  [[nodiscard]] WeightMatrix product() const;
};

struct SplitResult {
  WeightMatrix residual;
  AdapterPair adapter;
};

[[nodiscard]] SplitResult split_minor(const WeightMatrix& w, std::size_t rank);
[[nodiscard]] SplitResult split_major(const WeightMatrix& w, std::size_t rank);


// A entries i.i.d. normal with stddev 1/sqrt(rank) from the seeded stream;
// B exactly zero.
[[nodiscard]] AdapterPair init_lora(Shape shape, std::size_t rank, std::uint64_t seed);

// X base + (X A) B, never forming A B.
[[nodiscard]] WeightMatrix adapter_forward(const WeightMatrix& x, const WeightMatrix& base,
                                           const AdapterPair& adapter);

// base + A B
[[nodiscard]] WeightMatrix merge(const WeightMatrix& base, const AdapterPair& adapter);

}  // namespace urae::adapters
