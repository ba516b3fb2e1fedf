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

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "mgvo/error.h"
#include "mgvo/fnv.h"
#include "mgvo/lfn.h"

namespace mgvo {

inline constexpr std::size_t kChunkSize = 262144;

// Chunks needed to move `size` bytes; an empty blob still takes one
// (empty) terminal chunk.
constexpr std::size_t ChunkCount(std::uint64_t size) {
  return size == 0 ? 1 : static_cast<std::size_t>((size + kChunkSize - 1) / kChunkSize);
}

struct BlobInfo {
  std::uint64_t size = 0;
  std::string checksum;
  bool replica = false;
};

// Per-site immutable blob store.
//
// Layout under the store root:
//   <category>/<name>                       blobs owned by this site
//   <category>/<name>.meta                  "size|checksum\n"
//   replicas/<site>/<category>/<name>[.meta] copies of other sites' blobs
//   .staging/                                in-progress writes
//
// Writers of the same LFN are serialized (first writer wins); reads take no
// lock.
class StorageElement {
 public:
  struct Options {
    // fsync blobs and sidecars before acknowledging a write.
    bool sync_writes = true;
  };

  StorageElement(std::string site, std::filesystem::path root)
      : StorageElement(std::move(site), std::move(root), Options{}) {}
  StorageElement(std::string site, std::filesystem::path root, Options options);

  StorageElement(const StorageElement&) = delete;
  StorageElement& operator=(const StorageElement&) = delete;

  const std::string& site() const { return site_; }
  const std::filesystem::path& root() const { return root_; }

  // Stores a blob owned by this site and returns its checksum.
  // Errors: WrongSite, AlreadyExists, InvalidLfn, IoFailure.
  std::string Put(const Lfn& lfn, std::string_view bytes);

  // Verified read. Errors: NotFound, ChecksumMismatch.
  std::string Get(const Lfn& lfn) const;

  // Unverified read of chunk `index` (kChunkSize bytes, the last one
  // shorter). Errors: NotFound, InvalidArgument for an index out of range.
  std::string ReadChunk(const Lfn& lfn, std::size_t index) const;

  std::optional<BlobInfo> Stat(const Lfn& lfn) const;
  bool Contains(const Lfn& lfn) const;

  // Physical path of a blob (owned or replica). For fault injection and
  // external executables.
  std::filesystem::path PathOf(const Lfn& lfn) const;

  class IncomingTransfer;

  // Starts receiving `lfn` chunk by chunk. The LFN stays reserved until the
  // returned object commits or is destroyed. Errors: DestinationExists,
  // InvalidLfn.
  IncomingTransfer BeginIncoming(const Lfn& lfn, std::uint64_t size,
                                 std::string checksum);

 private:
  friend class IncomingTransfer;

  std::filesystem::path BlobPath(const Lfn& lfn) const;
  std::filesystem::path StagingPath();
  void Reserve(const Lfn& lfn, ErrorCode if_taken);
  void Release(const Lfn& lfn);
  void Publish(const Lfn& lfn, const std::filesystem::path& staged,
               std::uint64_t size, const std::string& checksum);

  std::string site_;
  std::filesystem::path root_;
  Options options_;
  std::mutex mu_;
  std::set<std::string> in_flight_;
  std::uint64_t staging_seq_ = 0;
};

class StorageElement::IncomingTransfer {
 public:
  IncomingTransfer(IncomingTransfer&& other) noexcept;
  IncomingTransfer& operator=(IncomingTransfer&&) = delete;
  ~IncomingTransfer();

  // Every chunk but the last must be exactly kChunkSize bytes.
  void Append(std::string_view chunk);

  // Verifies size, chunk count and checksum, then publishes the blob. On
  // ChecksumMismatch (or any other failure) the partial data is discarded.
  std::string Commit();

  std::size_t chunks_received() const { return chunks_; }

 private:
  friend class StorageElement;
  IncomingTransfer(StorageElement* store, Lfn lfn, std::uint64_t size,
                   std::string checksum, std::filesystem::path staged);
  void Abort();

  StorageElement* store_;
  Lfn lfn_;
  std::uint64_t expected_size_;
  std::string expected_checksum_;
  std::filesystem::path staged_;
  std::FILE* out_ = nullptr;
  Fnv1a64Hasher hasher_;
  std::uint64_t received_ = 0;
  std::size_t chunks_ = 0;
  bool done_ = false;
};

struct TransferReport {
  std::string checksum;
  std::size_t chunks = 0;
};

// Moves a blob between two storage elements in kChunkSize chunks; the
// destination records it as a replica. `on_chunk`, when set, sees (and may
// alter) each chunk in flight. Errors: SourceMissing, DestinationExists,
// ChecksumMismatch (destination left untouched).
TransferReport Transfer(
    const Lfn& lfn, const StorageElement& from, StorageElement& to,
    const std::function<void(std::size_t, std::string&)>& on_chunk = {});

}  // namespace mgvo
