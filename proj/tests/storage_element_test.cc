// Copyright 2026 The MGVO Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "gtest/gtest.h"
#include "mgvo/error.h"
#include "mgvo/fnv.h"
#include "mgvo/storage_element.h"
#include "test_util.h"

namespace mgvo {
namespace {

using testing::RandomBytes;
using testing::TempDir;

Lfn Image(const std::string& site, const std::string& name) {
  return Lfn{site, LfnCategory::kImages, name};
}

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInvalidArgument;
}

// Written out longhand so it does not share code with the hasher under test.
std::string ReferenceChecksum(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TEST(StorageElementTest, PutGetRoundTrip) {
  TempDir dir;
  StorageElement se("udine", dir.path());
  EXPECT_EQ(CodeOf([&] { se.Get(Image("udine", "a")); }), ErrorCode::kNotFound);
  EXPECT_EQ(se.Put(Image("udine", "a"), "foobar"), "85944171f73967e8");
  EXPECT_EQ(se.Get(Image("udine", "a")), "foobar");
  auto info = se.Stat(Image("udine", "a"));
  ASSERT_TRUE(info);
  EXPECT_EQ(info->size, 6u);
  EXPECT_FALSE(info->replica);
  EXPECT_EQ(testing::ReadFile(dir / "images/a.meta"), "6|85944171f73967e8\n");
}

TEST(StorageElementTest, EmptyBlob) {
  TempDir dir;
  StorageElement se("udine", dir.path());
  EXPECT_EQ(se.Put(Image("udine", "empty"), ""), "cbf29ce484222325");
  EXPECT_EQ(se.Get(Image("udine", "empty")), "");
}

TEST(StorageElementTest, PutErrors) {
  TempDir dir;
  StorageElement se("udine", dir.path());
  se.Put(Image("udine", "a"), "x");
  EXPECT_EQ(CodeOf([&] { se.Put(Image("udine", "a"), "y"); }), ErrorCode::kAlreadyExists);
  EXPECT_EQ(se.Get(Image("udine", "a")), "x");
  EXPECT_EQ(CodeOf([&] { se.Put(Image("oxford", "b"), "y"); }), ErrorCode::kWrongSite);
  EXPECT_FALSE(se.Contains(Image("oxford", "b")));
}

TEST(StorageElementTest, EightMebibytes) {
  TempDir dir;
  StorageElement se("udine", dir.path());
  std::mt19937_64 rng(8);
  std::string bytes = RandomBytes(rng, 8 << 20);
  std::string sum = se.Put(Image("udine", "big"), bytes);
  EXPECT_EQ(sum, ReferenceChecksum(bytes));
  std::string back = se.Get(Image("udine", "big"));
  EXPECT_EQ(ReferenceChecksum(back), sum);
  EXPECT_TRUE(back == bytes);
}

TEST(StorageElementTest, CorruptionDetected) {
  TempDir dir;
  StorageElement se("udine", dir.path());
  se.Put(Image("udine", "a"), "hello world");
  {
    std::fstream f(se.PathOf(Image("udine", "a")), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(3);
    f.put('X');
  }
  EXPECT_EQ(CodeOf([&] { se.Get(Image("udine", "a")); }), ErrorCode::kChecksumMismatch);
}

TEST(StorageElementTest, ReadChunk) {
  TempDir dir;
  StorageElement se("udine", dir.path());
  std::mt19937_64 rng(1);
  std::string bytes = RandomBytes(rng, kChunkSize + 10);
  se.Put(Image("udine", "a"), bytes);
  EXPECT_EQ(se.ReadChunk(Image("udine", "a"), 0), bytes.substr(0, kChunkSize));
  EXPECT_EQ(se.ReadChunk(Image("udine", "a"), 1), bytes.substr(kChunkSize));
  EXPECT_EQ(CodeOf([&] { se.ReadChunk(Image("udine", "a"), 2); }), ErrorCode::kInvalidArgument);
}

TEST(StorageElementTest, ChunkArithmetic) {
  EXPECT_EQ(ChunkCount(0), 1u);
  EXPECT_EQ(ChunkCount(1), 1u);
  EXPECT_EQ(ChunkCount(262144), 1u);
  EXPECT_EQ(ChunkCount(262145), 2u);
  EXPECT_EQ(ChunkCount(4u << 20), 16u);
}

class TransferTest : public ::testing::Test {
 protected:
  TempDir a_dir_, b_dir_;
  StorageElement a_{"udine", a_dir_.path()};
  StorageElement b_{"oxford", b_dir_.path()};
};

TEST_F(TransferTest, SizesAroundChunkBoundaries) {
  std::mt19937_64 rng(262144);
  int n = 0;
  for (std::size_t size : {std::size_t{0}, std::size_t{1}, kChunkSize - 1, kChunkSize,
                           kChunkSize + 1, 2 * kChunkSize, std::size_t{1} << 20,
                           std::size_t{4} << 20}) {
    Lfn lfn = Image("udine", "blob" + std::to_string(n++));
    std::string bytes = RandomBytes(rng, size);
    a_.Put(lfn, bytes);
    std::size_t seen = 0;
    TransferReport r = Transfer(lfn, a_, b_, [&](std::size_t index, std::string& chunk) {
      EXPECT_EQ(index, seen++);
      EXPECT_LE(chunk.size(), kChunkSize);
    });
    EXPECT_EQ(r.chunks, ChunkCount(size)) << size;
    EXPECT_EQ(seen, ChunkCount(size));
    EXPECT_EQ(r.checksum, ReferenceChecksum(bytes));
    EXPECT_TRUE(b_.Get(lfn) == bytes) << size;
    EXPECT_TRUE(b_.Stat(lfn)->replica);
    EXPECT_EQ(lfn.site, "udine");
  }
}

TEST_F(TransferTest, RandomSizesProperty) {
  std::mt19937_64 rng(4);
  for (int n = 0; n < 12; ++n) {
    std::size_t size = rng() % 3 == 0 ? kChunkSize * (rng() % 17) : rng() % (std::size_t{4} << 20);
    Lfn lfn = Image("udine", "r" + std::to_string(n));
    std::string bytes = RandomBytes(rng, size);
    a_.Put(lfn, bytes);
    Transfer(lfn, a_, b_);
    ASSERT_TRUE(b_.Get(lfn) == bytes) << size;
  }
}

TEST_F(TransferTest, Errors) {
  EXPECT_EQ(CodeOf([&] { Transfer(Image("udine", "missing"), a_, b_); }),
            ErrorCode::kSourceMissing);
  a_.Put(Image("udine", "a"), "abc");
  Transfer(Image("udine", "a"), a_, b_);
  EXPECT_EQ(CodeOf([&] { Transfer(Image("udine", "a"), a_, b_); }),
            ErrorCode::kDestinationExists);
}

TEST_F(TransferTest, CorruptedInFlightLeavesNoTrace) {
  std::mt19937_64 rng(3);
  std::string bytes = RandomBytes(rng, 3 * kChunkSize);
  Lfn lfn = Image("udine", "a");
  a_.Put(lfn, bytes);
  EXPECT_EQ(CodeOf([&] {
              Transfer(lfn, a_, b_, [](std::size_t index, std::string& chunk) {
                if (index == 1) chunk[7] ^= 1;
              });
            }),
            ErrorCode::kChecksumMismatch);
  EXPECT_FALSE(b_.Contains(lfn));
  EXPECT_FALSE(b_.Stat(lfn));
  for (const auto& entry : std::filesystem::recursive_directory_iterator(b_dir_.path())) {
    EXPECT_FALSE(entry.is_regular_file()) << entry.path();
  }
  // A clean retry then succeeds.
  Transfer(lfn, a_, b_);
  EXPECT_TRUE(b_.Get(lfn) == bytes);
}

TEST_F(TransferTest, AbandonedIncomingDiscarded) {
  Lfn lfn = Image("udine", "a");
  std::mt19937_64 rng(2);
  std::string bytes = RandomBytes(rng, kChunkSize + 10);
  {
    auto in = b_.BeginIncoming(lfn, bytes.size(), ReferenceChecksum(bytes));
    in.Append(std::string_view(bytes).substr(0, kChunkSize));
    EXPECT_EQ(CodeOf([&] { b_.BeginIncoming(lfn, 10, "cbf29ce484222325"); }), ErrorCode::kDestinationExists);
  }
  EXPECT_FALSE(b_.Contains(lfn));
  {
    // A malformed chunk aborts the transfer.
    auto bad = b_.BeginIncoming(lfn, bytes.size(), ReferenceChecksum(bytes));
    EXPECT_EQ(CodeOf([&] { bad.Append("short"); }), ErrorCode::kInvalidArgument);
  }
  EXPECT_FALSE(b_.Contains(lfn));
  auto in = b_.BeginIncoming(lfn, bytes.size(), ReferenceChecksum(bytes));
  in.Append(std::string_view(bytes).substr(0, kChunkSize));
  in.Append(std::string_view(bytes).substr(kChunkSize));
  EXPECT_EQ(in.Commit(), ReferenceChecksum(bytes));
  EXPECT_TRUE(b_.Get(lfn) == bytes);
}

}  // namespace
}  // namespace mgvo
