// SPDX-License-Identifier: Apache-2.0

#include "urae/archive.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <span>

#include <json.hpp>

#include "urae/error.hpp"

namespace urae::io {

namespace {

using json = nlohmann::json;


void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void check_names(const TensorArchive& archive) {
  std::set<std::string_view> seen;
  for (std::size_t i = 0; i < archive.entries.size(); ++i) {
    const std::string& name = archive.entries[i].name;
    if (name.empty()) throw ValidationError("archive entry " + std::to_string(i) + " has an empty name");
    if (!seen.insert(name).second) throw ValidationError("archive: duplicate entry name '" + name + "'");
  }
}

std::string expect(std::uint64_t want, std::uint64_t have) {
  return "expected " + std::to_string(want) + " bytes, found " + std::to_string(have);
}

std::uint64_t unsigned_field(const json& e, const char* key) {
  const auto it = e.find(key);
  if (it == e.end() || !it->is_number_unsigned()) {
    throw FormatError(std::string("archive header: entry field '") + key + "' missing or not an unsigned integer");
  }
  return it->get<std::uint64_t>();
}

}  // namespace

const WeightMatrix& TensorArchive::get(std::string_view name) const {
  for (const ArchiveEntry& e : entries) {
    if (e.name == name) return e.data;
  }
  throw DomainError("archive has no entry '" + std::string(name) + "'");
}

bool TensorArchive::contains(std::string_view name) const noexcept {
  for (const ArchiveEntry& e : entries) {
    if (e.name == name) return true;
  }
  return false;
}

std::vector<std::uint8_t> encode_archive(const TensorArchive& archive) {
  check_names(archive);
  json header;
  header["entries"] = json::array();
  header["metadata"] = json::object();
  std::uint64_t offset = 0;
  for (const ArchiveEntry& e : archive.entries) {
    header["entries"].push_back({{"name", e.name},
                                 {"rows", e.data.rows()},
                                 {"cols", e.data.cols()},
                                 {"offset", offset}});
    offset += 8 * static_cast<std::uint64_t>(e.data.size());
  }
  for (const auto& [k, v] : archive.metadata) header["metadata"][k] = v;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(16 + text.size() + offset);
  out.insert(out.end(), kArchiveMagic.begin(), kArchiveMagic.end());
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const ArchiveEntry& e : archive.entries) {
    for (std::size_t i = 0; i < e.data.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(e.data.data()[i]));
  }
  return out;
}

TensorArchive decode_archive(std::span<const std::uint8_t> bytes) {
  const std::size_t probe = std::min(bytes.size(), kArchiveMagic.size());
  if (probe > 0 && std::memcmp(bytes.data(), kArchiveMagic.data(), probe) != 0) {
    throw FormatError("archive: bad magic (not a URAETNS1 file)");
  }
  // A prefix of the magic is a cut-off archive rather than a foreign file.
  if (bytes.size() < kArchiveMagic.size()) {
    throw CorruptionError("archive: truncated magic, " + expect(kArchiveMagic.size(), bytes.size()));
  }
  if (bytes.size() < 16) throw CorruptionError("archive: truncated header length, " + expect(16, bytes.size()));
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  const std::uint64_t available = bytes.size() - 16;
  if (header_len > available) {
    throw CorruptionError("archive: header length " + std::to_string(header_len) + " runs past end of file, " +
                          expect(header_len > UINT64_MAX - 16 ? UINT64_MAX : 16 + header_len, bytes.size()));
  }
  const auto* hbegin = reinterpret_cast<const char*>(bytes.data() + 16);
  json header;
  try {
    header = json::parse(hbegin, hbegin + header_len);
  } catch (const json::exception& e) {
    throw FormatError(std::string("archive: header is not valid JSON: ") + e.what());
  }
  if (!header.is_object() || !header.contains("entries") || !header["entries"].is_array() ||
      !header.contains("metadata") || !header["metadata"].is_object()) {
    throw FormatError("archive header: expected object with 'entries' array and 'metadata' object");
  }

  TensorArchive archive;
  for (const auto& [k, v] : header["metadata"].items()) {
    if (!v.is_string()) throw FormatError("archive header: metadata value for '" + k + "' is not a string");
    archive.metadata.emplace(k, v.get<std::string>());
  }

  const std::uint8_t* payload = bytes.data() + 16 + header_len;
  const std::uint64_t payload_len = available - header_len;
  std::uint64_t cursor = 0;
  for (const json& e : header["entries"]) {
    if (!e.is_object()) throw FormatError("archive header: entry is not an object");
    const auto name_it = e.find("name");
    if (name_it == e.end() || !name_it->is_string()) throw FormatError("archive header: entry name missing");
    const std::uint64_t rows = unsigned_field(e, "rows");
    const std::uint64_t cols = unsigned_field(e, "cols");
    const std::uint64_t offset = unsigned_field(e, "offset");
    const std::string name = name_it->get<std::string>();
    if (offset != cursor) {
      throw CorruptionError("archive: entry '" + name + "' at offset " + std::to_string(offset) +
                            ", expected " + std::to_string(cursor));
    }
    // rows * cols * 8 must fit in what is left, checked without overflow.
    const std::uint64_t left = payload_len - cursor;
    if (cols != 0 && rows > left / 8 / cols) {
      throw CorruptionError("archive: entry '" + name + "' truncated, " +
                            expect(16 + header_len + cursor + 8 * rows * cols, bytes.size()));
    }
    const std::uint64_t count = rows * cols;
    std::vector<double> values(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      const double v = std::bit_cast<double>(get_u64(payload + cursor + 8 * i));
      if (!std::isfinite(v)) {
        throw ValidationError("archive: entry '" + name + "' has a non-finite value at index " + std::to_string(i));
      }
      values[i] = v;
    }
    cursor += 8 * count;
    archive.entries.push_back({name, WeightMatrix(rows, cols, std::move(values))});
  }
  if (cursor != payload_len) {
    throw CorruptionError("archive: trailing bytes after payload, " + expect(16 + header_len + cursor, bytes.size()));
  }
  check_names(archive);
  return archive;
}

std::uint64_t write_archive(const TensorArchive& archive, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_archive(archive);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
  return bytes.size();
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read from '" + path.string() + "' failed");
  return decode_archive(bytes);
}

}  // namespace urae::io
