// SPDX-License-Identifier: Apache-2.0
//
// Named-tensor container.
//
//   bytes 0..7    "URAETNS1"
//   bytes 8..15   header length H, u64 little-endian
//   next H bytes  UTF-8 JSON, keys sorted:
//                 {"entries":[{"cols":c,"name":"..","offset":o,"rows":r},..],
//                  "metadata":{"key":"value",..}}
//   payload       row-major little-endian IEEE-754 doubles; entry offsets are
//                 byte offsets from the start of the payload
//
// Entries are packed back to back in order, so the reader rejects gaps,
// overlaps and trailing bytes.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "urae/tensor.hpp"

namespace urae::io {

inline constexpr std::string_view kArchiveMagic = "URAETNS1";

struct ArchiveEntry {
  std::string name;
  WeightMatrix data;

  friend bool operator==(const ArchiveEntry&, const ArchiveEntry&) = default;
};

struct TensorArchive {
  std::vector<ArchiveEntry> entries;
  std::map<std::string, std::string> metadata;

  // Throws DomainError when absent.
  [[nodiscard]] const WeightMatrix& get(std::string_view name) const;
  [[nodiscard]] bool contains(std::string_view name) const noexcept;

  friend bool operator==(const TensorArchive&, const TensorArchive&) = default;
};

// In-memory encoding. ValidationError for empty or duplicate names.
[[nodiscard]] std::vector<std::uint8_t> encode_archive(const TensorArchive& archive);
// FormatError: bad magic or unparseable/ill-typed header.
// CorruptionError: truncation, out-of-range or non-contiguous offsets, trailing bytes.
// ValidationError: NaN/Inf payload, empty or duplicate names.
[[nodiscard]] TensorArchive decode_archive(std::span<const std::uint8_t> bytes);

// Returns the number of bytes written. Names are validated before the file is opened.
std::uint64_t write_archive(const TensorArchive& archive, const std::filesystem::path& path);
[[nodiscard]] TensorArchive read_archive(const std::filesystem::path& path);

}  // namespace urae::io
