// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace urae {

using Rng = std::mt19937_64;

// Named substreams. Values are part of the reproducibility contract: changing
// one changes every seeded output that depends on it.
enum class Stream : std::uint32_t {
  Generic = 0,
  Features = 1,
  Oracle = 2,
  RefDirection = 3,
  Init = 4,
  Selection = 5,
  LabelNoise = 6,
  Trial = 7,
  Lora = 8,
  Batch = 9,
  FlowNoise = 10,
  FlowTime = 11,
  Dropout = 12,
  Guidance = 13,
  Dataset = 14,
  Eval = 15,
  Sampling = 16,
  Experiment = 17,
};

// Derives an independent 64-bit seed from (seed, stream, index). std::seed_seq
// has a fully specified algorithm, so derived seeds are portable.
[[nodiscard]] inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream,
                                               std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

[[nodiscard]] inline Rng make_rng(std::uint64_t seed, Stream stream,
                                  std::uint64_t index = 0) {
  return Rng(derive_seed(seed, stream, index));
}

}  // namespace urae
