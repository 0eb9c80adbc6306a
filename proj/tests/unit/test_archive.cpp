// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>

#include "support.hpp"
#include "urae/archive.hpp"
#include "urae/error.hpp"

using namespace urae;
using namespace urae::io;
namespace fs = std::filesystem;

namespace {

using Bytes = std::vector<std::uint8_t>;

void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(Bytes& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

// Hand-assembled container, independent of the encoder.
Bytes raw(const std::string& header, const std::vector<double>& payload, std::string_view magic = "URAETNS1") {
  Bytes out(magic.begin(), magic.end());
  put_u64(out, header.size());
  out.insert(out.end(), header.begin(), header.end());
  for (double v : payload) put_f64(out, v);
  return out;
}

Bytes slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "urae_test_archive";
  fs::create_directories(dir);
  return dir / name;
}

template <class E>
std::string message_of(const Bytes& b) {
  try {
    (void)decode_archive(b);
  } catch (const E& e) {
    return e.what();
  }
  return "<no throw>";
}

}  // namespace

TEST(Archive, EmptyArchiveBytes) {
  const Bytes expected = raw(R"({"entries":[],"metadata":{}})", {});
  EXPECT_EQ(encode_archive({}), expected);
  EXPECT_EQ(decode_archive(expected), TensorArchive{});
}

TEST(Archive, SingleScalarBytes) {
  TensorArchive a;
  a.entries.push_back({"w", WeightMatrix(1, 1, {1.0})});
  const auto bytes = encode_archive(a);
  const Bytes expected = raw(R"({"entries":[{"cols":1,"name":"w","offset":0,"rows":1}],"metadata":{}})", {1.0});
  EXPECT_EQ(bytes, expected);
  const Bytes tail(bytes.end() - 8, bytes.end());
  EXPECT_EQ(tail, (Bytes{0, 0, 0, 0, 0, 0, 0xF0, 0x3F}));
}

TEST(Archive, RoundTripIncludingZeroExtent) {
  TensorArchive a;
  a.entries.push_back({"a", urae::testing::random_matrix(3, 5, 1)});
  a.entries.push_back({"empty", WeightMatrix(0, 4)});
  a.entries.push_back({"tiny", WeightMatrix(1, 1, {std::numeric_limits<double>::denorm_min()})});
  a.entries.push_back({"b", urae::testing::random_matrix(7, 2, 2)});
  a.metadata = {{"rank", "2"}, {"mode", "minor"}, {"note", "quote \" and \xc3\xa9"}};
  const auto bytes = encode_archive(a);
  EXPECT_EQ(decode_archive(bytes), a);
  EXPECT_EQ(encode_archive(decode_archive(bytes)), bytes);

  const auto path = scratch("rt.urae");
  EXPECT_EQ(write_archive(a, path), bytes.size());
  EXPECT_EQ(slurp(path), bytes);
  const auto back = read_archive(path);
  EXPECT_EQ(back, a);
  const auto path2 = scratch("rt2.urae");
  write_archive(back, path2);
  EXPECT_EQ(slurp(path2), bytes);
  EXPECT_EQ(back.get("b"), a.entries[3].data);
  EXPECT_TRUE(back.contains("empty"));
  EXPECT_THROW((void)back.get("missing"), DomainError);
}

TEST(Archive, RoundTripRandomShapes) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dim(0, 9);
  for (int trial = 0; trial < 25; ++trial) {
    TensorArchive a;
    const std::size_t n = dim(rng);
    for (std::size_t k = 0; k < n; ++k) {
      a.entries.push_back({"t" + std::to_string(k), urae::testing::random_matrix(dim(rng), dim(rng), rng())});
    }
    a.metadata["trial"] = std::to_string(trial);
    EXPECT_EQ(decode_archive(encode_archive(a)), a);
  }
}

TEST(Archive, BadMagic) {
  const Bytes b = raw(R"({"entries":[],"metadata":{}})", {}, "URAETNS2");
  EXPECT_THROW((void)decode_archive(b), FormatError);
  EXPECT_THROW((void)decode_archive(Bytes{'U', 'R'}), CorruptionError);
  EXPECT_THROW((void)decode_archive(Bytes{'X'}), FormatError);
}

TEST(Archive, MalformedHeader) {
  EXPECT_THROW((void)decode_archive(raw("{not json", {})), FormatError);
  EXPECT_THROW((void)decode_archive(raw(R"({"entries":[{"name":"w"}],"metadata":{}})", {})), FormatError);
  EXPECT_THROW((void)decode_archive(raw(R"({"entries":[],"metadata":{"k":1}})", {})), FormatError);
}

TEST(Archive, TruncationNamesByteCounts) {
  TensorArchive a;
  a.entries.push_back({"w", urae::testing::random_matrix(2, 3, 5)});
  auto bytes = encode_archive(a);
  const auto full = bytes.size();
  bytes.pop_back();
  const auto msg = message_of<CorruptionError>(bytes);
  EXPECT_NE(msg.find("expected " + std::to_string(full) + " bytes, found " + std::to_string(full - 1)),
            std::string::npos)
      << msg;

  // Header length running past the end of the file.
  Bytes short_header(kArchiveMagic.begin(), kArchiveMagic.end());
  put_u64(short_header, 1000);
  short_header.push_back('{');
  EXPECT_THROW((void)decode_archive(short_header), CorruptionError);
  // Absurd header length must not overflow the bounds check.
  Bytes huge(kArchiveMagic.begin(), kArchiveMagic.end());
  put_u64(huge, std::numeric_limits<std::uint64_t>::max());
  EXPECT_THROW((void)decode_archive(huge), CorruptionError);
}

TEST(Archive, OffsetsMustBeContiguous) {
  const std::string gap =
      R"({"entries":[{"cols":1,"name":"a","offset":0,"rows":1},{"cols":1,"name":"b","offset":16,"rows":1}],"metadata":{}})";
  EXPECT_THROW((void)decode_archive(raw(gap, {1.0, 2.0, 3.0})), CorruptionError);
  const std::string overlap =
      R"({"entries":[{"cols":1,"name":"a","offset":0,"rows":1},{"cols":1,"name":"b","offset":0,"rows":1}],"metadata":{}})";
  EXPECT_THROW((void)decode_archive(raw(overlap, {1.0, 2.0})), CorruptionError);
  const std::string ok =
      R"({"entries":[{"cols":1,"name":"a","offset":0,"rows":1},{"cols":1,"name":"b","offset":8,"rows":1}],"metadata":{}})";
  EXPECT_EQ(decode_archive(raw(ok, {1.0, 2.0})).get("b")(0, 0), 2.0);
  EXPECT_THROW((void)decode_archive(raw(ok, {1.0, 2.0, 3.0})), CorruptionError);
}

TEST(Archive, NonFinitePayloadRejected) {
  const std::string h = R"({"entries":[{"cols":2,"name":"w","offset":0,"rows":1}],"metadata":{}})";
  EXPECT_THROW((void)decode_archive(raw(h, {1.0, std::nan("")})), ValidationError);
  EXPECT_THROW((void)decode_archive(raw(h, {std::numeric_limits<double>::infinity(), 0.0})), ValidationError);
}

TEST(Archive, NamesValidated) {
  TensorArchive dup;
  dup.entries.push_back({"w", WeightMatrix(1, 1)});
  dup.entries.push_back({"w", WeightMatrix(1, 1)});
  EXPECT_THROW((void)encode_archive(dup), ValidationError);
  const auto path = scratch("never.urae");
  fs::remove(path);
  EXPECT_THROW(write_archive(dup, path), ValidationError);
  EXPECT_FALSE(fs::exists(path));
  TensorArchive empty_name;
  empty_name.entries.push_back({"", WeightMatrix(1, 1)});
  EXPECT_THROW((void)encode_archive(empty_name), ValidationError);

  const std::string h =
      R"({"entries":[{"cols":1,"name":"w","offset":0,"rows":1},{"cols":1,"name":"w","offset":8,"rows":1}],"metadata":{}})";
  EXPECT_THROW((void)decode_archive(raw(h, {1.0, 2.0})), ValidationError);
}

TEST(Archive, MissingFileIsIoError) {
  EXPECT_THROW((void)read_archive(scratch("does_not_exist.urae")), IoError);
}
