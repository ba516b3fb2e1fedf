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
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mgvo/catalog.h"
#include "mgvo/central_node.h"
#include "mgvo/clock.h"
#include "mgvo/compute.h"
#include "mgvo/federation.h"
#include "mgvo/storage_element.h"
#include "mgvo/transport.h"
#include "mgvo/wire.h"

namespace mgvo {

// Positive token validations are cached for at most this long.
inline constexpr std::int64_t kTokenCacheTtlMs = 60 * 1000;

struct SiteNodeConfig {
  std::string name;
  // How peers and the central node reach this node.
  std::string address;
  std::string central_address;
  // Holds catalog.log, jobs.log, store/ and work/.
  std::filesystem::path store_root;
  // Pseudonymization salt; the site name when empty.
  std::string salt;
  FederationConfig federation;
  bool sync_writes = true;
  std::optional<std::uint64_t> seed;
  std::int64_t rpc_timeout_ms = 30000;
};

// A hospital site: local catalog, storage element and compute element behind
// the service endpoint.
class SiteNode : public Endpoint {
 public:
  SiteNode(SiteNodeConfig config, Transport& transport, const Clock& clock);
  ~SiteNode() override;

  SiteNode(const SiteNode&) = delete;
  SiteNode& operator=(const SiteNode&) = delete;

  // Registers with the central node. Errors: Unreachable, DuplicateSite.
  void Start();

  std::string HandleFrame(std::string_view frame) override;

  const std::string& name() const { return config_.name; }
  const SiteNodeConfig& config() const { return config_; }
  Catalog& catalog() { return *catalog_; }
  const Catalog& catalog() const { return *catalog_; }
  StorageElement& storage() { return *storage_; }
  std::filesystem::path catalog_log_path() const;
  std::filesystem::path jobs_log_path() const;

  // Number of VALIDATE_TOKEN round trips made to the central node.
  std::size_t central_validations() const;

 private:
  class Federation;
  struct Upload;
  struct CachedToken {
    std::string user;
    std::int64_t valid_until_ms = 0;
  };

  Message Dispatch(const Message& request);
  std::string Authorize(const std::string& token);

  Json HandleAdd(const Message& request);
  Json HandleRetrieve(const Message& request);
  Json HandleQuery(const Message& request);
  Json HandleQueryRemote(const Message& request);
  Json HandleAddAlg(const Message& request);
  Json HandleExecAlg(const Message& request);
  Json HandleFilePutBegin(const Message& request);
  Json HandleFileChunk(const Message& request);
  Json HandleFilePutEnd(const Message& request);

  // Bytes carried inline ("data", base64) or by a finished upload.
  std::string PayloadBytes(const Json& payload);
  // Membership from the central node; the last known list if it is down.
  std::map<std::string, std::string> Members(const std::string& token);
  std::string AddressOf(const std::string& site, const std::string& token);
  void FetchReplica(const Lfn& lfn, const std::string& token);
  void PushFile(const Lfn& lfn, const std::string& address,
                const std::string& token);

  SiteNodeConfig config_;
  Transport& transport_;
  const Clock& clock_;
  RpcClient rpc_;
  IdSource ids_;
  std::unique_ptr<Catalog> catalog_;
  std::unique_ptr<StorageElement> storage_;
  std::unique_ptr<ComputeElement> compute_;

  std::mutex ingest_mu_;
  std::mutex replica_mu_;

  mutable std::mutex mu_;
  std::map<std::string, CachedToken> token_cache_;
  std::size_t central_validations_ = 0;
  std::map<std::string, std::string> members_;
  std::map<std::string, std::shared_ptr<Upload>> uploads_;
};

Json JobToJson(const JobRecord& job);

}  // namespace mgvo
