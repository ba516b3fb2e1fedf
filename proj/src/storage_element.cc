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

#include "mgvo/storage_element.h"

#include <unistd.h>

#include <fstream>
#include <sstream>
#include <system_error>

#include "mgvo/error.h"

namespace mgvo {
namespace fs = std::filesystem;
namespace {

constexpr std::string_view kMetaSuffix = ".meta";

fs::path MetaPath(const fs::path& blob) {
  fs::path p = blob;
  p += kMetaSuffix;
  return p;
}

[[noreturn]] void Io(const std::string& what) {
  throw Error(ErrorCode::kIoFailure, what);
}

void WriteFile(const fs::path& path, std::string_view bytes, bool sync) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) Io("cannot create " + path.string());
  bool ok = bytes.empty() ||
            std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size();
  ok = std::fflush(f) == 0 && ok;
  if (ok && sync) ok = ::fsync(::fileno(f)) == 0;
  ok = std::fclose(f) == 0 && ok;
  if (!ok) Io("cannot write " + path.string());
}

std::optional<std::string> ReadWholeFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

std::optional<BlobInfo> ReadMeta(const fs::path& blob) {
  auto text = ReadWholeFile(MetaPath(blob));
  if (!text) return std::nullopt;
  std::string line = *text;
  if (!line.empty() && line.back() == '\n') line.pop_back();
  std::size_t bar = line.find('|');
  if (bar == std::string::npos) return std::nullopt;
  BlobInfo info;
  try {
    info.size = std::stoull(line.substr(0, bar));
  } catch (const std::exception&) {
    return std::nullopt;
  }
  info.checksum = line.substr(bar + 1);
  if (!IsHex16(info.checksum)) return std::nullopt;
  return info;
}

void CheckStorableName(const Lfn& lfn) {
  if (lfn.name.size() >= kMetaSuffix.size() &&
      lfn.name.compare(lfn.name.size() - kMetaSuffix.size(), kMetaSuffix.size(),
                       kMetaSuffix) == 0) {
    throw Error(ErrorCode::kInvalidLfn,
                "names ending in .meta are reserved: " + lfn.ToString());
  }
}

}  // namespace

StorageElement::StorageElement(std::string site, fs::path root, Options options)
    : site_(std::move(site)), root_(std::move(root)), options_(options) {
  std::error_code ec;
  fs::create_directories(root_ / ".staging", ec);
  if (ec) Io("cannot create store root " + root_.string() + ": " + ec.message());
  // Leftovers of interrupted writes are never visible; drop them.
  for (const auto& entry : fs::directory_iterator(root_ / ".staging", ec)) {
    fs::remove(entry.path(), ec);
  }
}

fs::path StorageElement::BlobPath(const Lfn& lfn) const {
  if (lfn.site == site_) {
    return root_ / CategoryName(lfn.category) / lfn.name;
  }
  return root_ / "replicas" / lfn.site / CategoryName(lfn.category) / lfn.name;
}

fs::path StorageElement::PathOf(const Lfn& lfn) const { return BlobPath(lfn); }

fs::path StorageElement::StagingPath() {
  std::lock_guard<std::mutex> lock(mu_);
  return root_ / ".staging" / ("blob-" + std::to_string(++staging_seq_));
}

void StorageElement::Reserve(const Lfn& lfn, ErrorCode if_taken) {
  CheckStorableName(lfn);
  std::lock_guard<std::mutex> lock(mu_);
  if (in_flight_.count(lfn.ToString()) != 0 || Contains(lfn)) {
    throw Error(if_taken, lfn.ToString() + " at site " + site_);
  }
  in_flight_.insert(lfn.ToString());
}

void StorageElement::Release(const Lfn& lfn) {
  std::lock_guard<std::mutex> lock(mu_);
  in_flight_.erase(lfn.ToString());
}

void StorageElement::Publish(const Lfn& lfn, const fs::path& staged,
                             std::uint64_t size, const std::string& checksum) {
  fs::path blob = BlobPath(lfn);
  std::error_code ec;
  fs::create_directories(blob.parent_path(), ec);
  if (ec) Io("cannot create " + blob.parent_path().string());
  // Sidecar first: a visible blob always has its metadata.
  fs::path meta_staged = StagingPath();
  WriteFile(meta_staged, std::to_string(size) + "|" + checksum + "\n",
            options_.sync_writes);
  fs::rename(meta_staged, MetaPath(blob), ec);
  if (ec) Io("cannot publish " + MetaPath(blob).string());
  fs::rename(staged, blob, ec);
  if (ec) Io("cannot publish " + blob.string());
}

std::string StorageElement::Put(const Lfn& lfn, std::string_view bytes) {
  if (lfn.site != site_) {
    throw Error(ErrorCode::kWrongSite,
                lfn.ToString() + " does not belong to site " + site_);
  }
  Reserve(lfn, ErrorCode::kAlreadyExists);
  fs::path staged = StagingPath();
  try {
    std::string checksum = Checksum(bytes);
    WriteFile(staged, bytes, options_.sync_writes);
    Publish(lfn, staged, bytes.size(), checksum);
    Release(lfn);
    return checksum;
  } catch (...) {
    std::error_code ec;
    fs::remove(staged, ec);
    Release(lfn);
    throw;
  }
}

bool StorageElement::Contains(const Lfn& lfn) const {
  std::error_code ec;
  return fs::is_regular_file(BlobPath(lfn), ec);
}

std::optional<BlobInfo> StorageElement::Stat(const Lfn& lfn) const {
  if (!Contains(lfn)) return std::nullopt;
  auto info = ReadMeta(BlobPath(lfn));
  if (info) info->replica = lfn.site != site_;
  return info;
}

std::string StorageElement::Get(const Lfn& lfn) const {
  fs::path blob = BlobPath(lfn);
  auto bytes = ReadWholeFile(blob);
  if (!bytes) throw Error(ErrorCode::kNotFound, lfn.ToString() + " at " + site_);
  auto info = ReadMeta(blob);
  if (!info) {
    throw Error(ErrorCode::kChecksumMismatch,
                "unreadable sidecar for " + lfn.ToString());
  }
  if (bytes->size() != info->size || Checksum(*bytes) != info->checksum) {
    throw Error(ErrorCode::kChecksumMismatch, lfn.ToString() + " at " + site_);
  }
  return std::move(*bytes);
}

std::string StorageElement::ReadChunk(const Lfn& lfn, std::size_t index) const {
  auto info = Stat(lfn);
  if (!info) throw Error(ErrorCode::kNotFound, lfn.ToString() + " at " + site_);
  if (index >= ChunkCount(info->size)) {
    throw Error(ErrorCode::kInvalidArgument,
                "chunk " + std::to_string(index) + " out of range");
  }
  std::uint64_t offset = std::uint64_t{index} * kChunkSize;
  std::size_t length = static_cast<std::size_t>(
      std::min<std::uint64_t>(kChunkSize, info->size - offset));
  std::string out(length, '\0');
  std::ifstream in(BlobPath(lfn), std::ios::binary);
  in.seekg(static_cast<std::streamoff>(offset));
  if (!in.read(out.data(), static_cast<std::streamsize>(length))) {
    throw Error(ErrorCode::kChecksumMismatch,
                "short read of " + lfn.ToString() + " at " + site_);
  }
  return out;
}

StorageElement::IncomingTransfer StorageElement::BeginIncoming(
    const Lfn& lfn, std::uint64_t size, std::string checksum) {
  if (!IsHex16(checksum)) {
    throw Error(ErrorCode::kInvalidArgument, "bad checksum '" + checksum + "'");
  }
  Reserve(lfn, ErrorCode::kDestinationExists);
  try {
    return IncomingTransfer(this, lfn, size, std::move(checksum), StagingPath());
  } catch (...) {
    Release(lfn);
    throw;
  }
}

StorageElement::IncomingTransfer::IncomingTransfer(StorageElement* store,
                                                   Lfn lfn, std::uint64_t size,
                                                   std::string checksum,
                                                   fs::path staged)
    : store_(store),
      lfn_(std::move(lfn)),
      expected_size_(size),
      expected_checksum_(std::move(checksum)),
      staged_(std::move(staged)) {
  out_ = std::fopen(staged_.c_str(), "wb");
  if (out_ == nullptr) Io("cannot create " + staged_.string());
}

StorageElement::IncomingTransfer::IncomingTransfer(
    IncomingTransfer&& other) noexcept
    : store_(other.store_),
      lfn_(std::move(other.lfn_)),
      expected_size_(other.expected_size_),
      expected_checksum_(std::move(other.expected_checksum_)),
      staged_(std::move(other.staged_)),
      out_(other.out_),
      hasher_(other.hasher_),
      received_(other.received_),
      chunks_(other.chunks_),
      done_(other.done_) {
  other.out_ = nullptr;
  other.done_ = true;
}

StorageElement::IncomingTransfer::~IncomingTransfer() {
  if (!done_) Abort();
}

void StorageElement::IncomingTransfer::Abort() {
  if (out_ != nullptr) {
    std::fclose(out_);
    out_ = nullptr;
  }
  std::error_code ec;
  fs::remove(staged_, ec);
  store_->Release(lfn_);
  done_ = true;
}

void StorageElement::IncomingTransfer::Append(std::string_view chunk) {
  if (done_) throw Error(ErrorCode::kInvalidArgument, "transfer already closed");
  const bool last = received_ + chunk.size() == expected_size_;
  if (received_ + chunk.size() > expected_size_ ||
      chunks_ >= ChunkCount(expected_size_) ||
      (chunk.size() != kChunkSize && !last)) {
    Abort();
    throw Error(ErrorCode::kInvalidArgument,
                "chunk " + std::to_string(chunks_) + " of " +
                    std::to_string(chunk.size()) + " bytes breaks the stream");
  }
  if (!chunk.empty() &&
      std::fwrite(chunk.data(), 1, chunk.size(), out_) != chunk.size()) {
    Abort();
    Io("cannot write " + staged_.string());
  }
  hasher_.Update(chunk);
  received_ += chunk.size();
  ++chunks_;
}

std::string StorageElement::IncomingTransfer::Commit() {
  if (done_) throw Error(ErrorCode::kInvalidArgument, "transfer already closed");
  if (received_ != expected_size_ || chunks_ != ChunkCount(expected_size_)) {
    Abort();
    throw Error(ErrorCode::kInvalidArgument,
                "incomplete transfer of " + lfn_.ToString());
  }
  std::string actual = Hex64(hasher_.digest());
  if (actual != expected_checksum_) {
    Abort();
    throw Error(ErrorCode::kChecksumMismatch,
                lfn_.ToString() + ": expected " + expected_checksum_ +
                    ", received " + actual);
  }
  bool ok = std::fflush(out_) == 0;
  if (ok && store_->options_.sync_writes) ok = ::fsync(::fileno(out_)) == 0;
  ok = std::fclose(out_) == 0 && ok;
  out_ = nullptr;
  if (!ok) {
    Abort();
    Io("cannot write " + staged_.string());
  }
  try {
    store_->Publish(lfn_, staged_, received_, actual);
  } catch (...) {
    Abort();
    throw;
  }
  store_->Release(lfn_);
  done_ = true;
  return actual;
}

TransferReport Transfer(
    const Lfn& lfn, const StorageElement& from, StorageElement& to,
    const std::function<void(std::size_t, std::string&)>& on_chunk) {
  if (!from.Contains(lfn)) {
    throw Error(ErrorCode::kSourceMissing,
                lfn.ToString() + " at " + from.site());
  }
  std::string bytes = from.Get(lfn);
  std::string checksum = Checksum(bytes);
  auto incoming = to.BeginIncoming(lfn, bytes.size(), checksum);
  const std::size_t chunks = ChunkCount(bytes.size());
  for (std::size_t i = 0; i < chunks; ++i) {
    std::string chunk = bytes.substr(i * kChunkSize, kChunkSize);
    if (on_chunk) on_chunk(i, chunk);
    incoming.Append(chunk);
  }
  return TransferReport{incoming.Commit(), chunks};
}

}  // namespace mgvo
