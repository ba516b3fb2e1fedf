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

#include "mgvo/site_node.h"

#include <algorithm>

#include "mgvo/dicom.h"
#include "mgvo/error.h"
#include "mgvo/fnv.h"
#include "mgvo/lfn.h"
#include "mgvo/query.h"
#include "mgvo/result_set.h"

namespace mgvo {

namespace fs = std::filesystem;

namespace {

std::string Str(const Json& p, const char* key) {
  return p.at(key).get<std::string>();
}

bool IsTransportFailure(const Error& e) {
  return e.code() == ErrorCode::kUnreachable || e.code() == ErrorCode::kTimeout;
}

Json AlgorithmToJson(const AlgorithmRow& a) {
  return Json{{"name", a.name},
              {"version", a.version},
              {"lfn", a.lfn},
              {"checksum", a.checksum},
              {"builtin", a.builtin}};
}

AlgorithmRow AlgorithmFromJson(const Json& j) {
  return AlgorithmRow{Str(j, "name"), Str(j, "version"), Str(j, "lfn"),
                      Str(j, "checksum"), j.at("builtin").get<bool>()};
}

}  // namespace

Json JobToJson(const JobRecord& job) {
  return Json{{"job_id", job.job_id},
              {"name", job.name},
              {"version", job.version},
              {"input_lfn", job.input_lfn},
              {"output_lfn", job.output_lfn ? Json(*job.output_lfn) : Json()},
              {"status", job.status == JobStatus::kDone ? "DONE" : "FAILED"},
              {"site", job.site},
              {"elapsed_ms", job.elapsed_ms},
              {"idempotent", job.idempotent}};
}

struct SiteNode::Upload {
  std::mutex mu;
  std::uint64_t size = 0;
  std::string checksum;
  std::optional<StorageElement::IncomingTransfer> incoming;
  std::string buffer;  // uploads not aimed at an LFN
  std::uint64_t received = 0;
  std::size_t next_seq = 0;
  bool finished = false;
};

class SiteNode::Federation : public FederationContext {
 public:
  Federation(SiteNode& node, std::string token)
      : node_(node), token_(std::move(token)) {}

  const std::string& origin() const override { return node_.config_.name; }

  std::vector<std::string> RefreshMembers() override {
    members_ = node_.Members(token_);
    std::vector<std::string> names;
    for (const auto& [name, address] : members_) names.push_back(name);
    return names;
  }

  std::string NewQueryId() override { return node_.ids_.Hex16(); }

  std::vector<Row> LocalQuery(const FormalQuery& q) override {
    return node_.catalog_->LocalQuery(q);
  }

  SiteResult QueryRemote(const std::string& site, const std::string& query_id,
                         const std::string& canonical_query,
                         std::int64_t timeout_ms) override {
    auto it = members_.find(site);
    if (it == members_.end()) return SiteResult::Failed(site, "unreachable", 0);
    Message request{std::string(kind::kQueryRemoteReq), token_,
                    node_.rpc_.NextId(),
                    Json{{"query", canonical_query}, {"query_id", query_id}}};
    CallOutcome outcome = node_.rpc_.CallRaw(it->second, request, timeout_ms);
    switch (outcome.status) {
      case CallOutcome::Status::kUnreachable:
        return SiteResult::Failed(site, "unreachable", outcome.elapsed_ms);
      case CallOutcome::Status::kTimeout:
        return SiteResult::Failed(site, "timeout", outcome.elapsed_ms);
      case CallOutcome::Status::kOk:
        break;
    }
    try {
      Message response = DecodeFrame(outcome.response);
      if (response.kind == kind::kError) {
        return SiteResult::Failed(site,
                                  response.payload.value("code", "") + ": " +
                                      response.payload.value("message", ""),
                                  outcome.elapsed_ms);
      }
      SiteResult result =
          ParseSiteResult(response.payload.at("site_result").get<std::string>());
      if (result.site != site) {
        return SiteResult::Failed(site, "answer from " + result.site,
                                  outcome.elapsed_ms);
      }
      // Report the round trip seen from here, not just the remote's work.
      result.elapsed_ms = std::max(result.elapsed_ms, outcome.elapsed_ms);
      return result;
    } catch (const std::exception& e) {
      return SiteResult::Failed(site, std::string("bad response: ") + e.what(),
                                outcome.elapsed_ms);
    }
  }

  std::int64_t NowMs() const override { return node_.clock_.NowMs(); }

 private:
  SiteNode& node_;
  std::string token_;
  std::map<std::string, std::string> members_;
};

SiteNode::SiteNode(SiteNodeConfig config, Transport& transport,
                   const Clock& clock)
    : config_(std::move(config)),
      transport_(transport),
      clock_(clock),
      rpc_(transport, config_.name),
      ids_(config_.seed) {
  if (!IsValidSiteName(config_.name) || config_.name == kBuiltinSite) {
    throw Error(ErrorCode::kInvalidArgument, "bad site name '" + config_.name + "'");
  }
  if (config_.federation.per_site_timeout_ms <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "per-site timeout must be positive");
  }
  if (config_.salt.empty()) config_.salt = config_.name;
  fs::create_directories(config_.store_root);
  catalog_ = Catalog::Open(config_.name, catalog_log_path(), config_.sync_writes);
  storage_ = std::make_unique<StorageElement>(
      config_.name, config_.store_root / "store",
      StorageElement::Options{config_.sync_writes});
  compute_ = std::make_unique<ComputeElement>(config_.name, *storage_, *catalog_,
                                              clock_, config_.store_root / "work",
                                              jobs_log_path());
}

SiteNode::~SiteNode() = default;

fs::path SiteNode::catalog_log_path() const {
  return config_.store_root / "catalog.log";
}

fs::path SiteNode::jobs_log_path() const { return config_.store_root / "jobs.log"; }

std::size_t SiteNode::central_validations() const {
  std::lock_guard<std::mutex> lock(mu_);
  return central_validations_;
}

void SiteNode::Start() {
  Message response;
  try {
    response = rpc_.Call(config_.central_address, kind::kRegisterSite, "",
                         Json{{"name", config_.name}, {"address", config_.address}},
                         config_.rpc_timeout_ms);
  } catch (const Error& e) {
    if (IsTransportFailure(e)) {
      throw Error(ErrorCode::kUnreachable, "central unreachable");
    }
    throw;
  }
  std::lock_guard<std::mutex> lock(mu_);
  members_.clear();
  for (const auto& s : SitesFromJson(response.payload.at("sites"))) {
    members_[s.name] = s.address;
  }
}

std::string SiteNode::HandleFrame(std::string_view frame) {
  std::uint64_t id = 0;
  try {
    Message request = DecodeFrame(frame);
    id = request.id;
    const auto& kinds = SiteRequestKinds();
    if (std::find(kinds.begin(), kinds.end(), request.kind) == kinds.end()) {
      throw Error(ErrorCode::kUnknownKind, request.kind);
    }
    return EncodeFrame(Dispatch(request));
  } catch (const Error& e) {
    return EncodeFrame(MakeError(id, ErrorCodeName(e.code()), e.message()));
  } catch (const Json::exception& e) {
    return EncodeFrame(
        MakeError(id, "MalformedFrame", std::string("bad payload: ") + e.what()));
  } catch (const std::exception& e) {
    return EncodeFrame(MakeError(id, "IoFailure", e.what()));
  }
}

std::string SiteNode::Authorize(const std::string& token) {
  if (token.empty()) throw Error(ErrorCode::kUnauthenticated, "missing token");
  const std::int64_t now = clock_.NowMs();
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = token_cache_.find(token);
    if (it != token_cache_.end()) {
      if (now < it->second.valid_until_ms) return it->second.user;
      token_cache_.erase(it);
    }
    ++central_validations_;
  }
  Message response;
  try {
    response = rpc_.Call(config_.central_address, kind::kValidateToken, token,
                         Json::object(), config_.rpc_timeout_ms);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidToken || e.code() == ErrorCode::kExpired) {
      throw Error(ErrorCode::kUnauthenticated,
                  std::string(ErrorCodeName(e.code())) + ": " + e.message());
    }
    if (IsTransportFailure(e)) {
      throw Error(ErrorCode::kUnreachable, "central unreachable");
    }
    throw;
  }
  CachedToken entry;
  entry.user = Str(response.payload, "user");
  entry.valid_until_ms = std::min(
      now + kTokenCacheTtlMs, response.payload.at("expires_at").get<std::int64_t>());
  std::lock_guard<std::mutex> lock(mu_);
  token_cache_[token] = entry;
  return entry.user;
}

Message SiteNode::Dispatch(const Message& request) {
  Message response;
  response.kind = ResponseKind(request.kind);
  response.id = request.id;
  const std::string& k = request.kind;

  if (k == kind::kAuth) {
    Message central;
    try {
      central = rpc_.Call(config_.central_address, kind::kAuth, "",
                          request.payload, config_.rpc_timeout_ms);
    } catch (const Error& e) {
      if (IsTransportFailure(e)) {
        throw Error(ErrorCode::kUnreachable, "central unreachable");
      }
      throw;
    }
    response.payload = central.payload;
    return response;
  }

  Authorize(request.token);
  if (k == kind::kAdd) {
    response.payload = HandleAdd(request);
  } else if (k == kind::kRetrieve) {
    response.payload = HandleRetrieve(request);
  } else if (k == kind::kQuery) {
    response.payload = HandleQuery(request);
  } else if (k == kind::kQueryRemoteReq) {
    response.payload = HandleQueryRemote(request);
  } else if (k == kind::kAddAlg) {
    response.payload = HandleAddAlg(request);
  } else if (k == kind::kExecAlg) {
    response.payload = HandleExecAlg(request);
  } else if (k == kind::kFilePutBegin) {
    response.payload = HandleFilePutBegin(request);
  } else if (k == kind::kFileChunk) {
    response.payload = HandleFileChunk(request);
  } else if (k == kind::kFilePutEnd) {
    response.payload = HandleFilePutEnd(request);
  } else if (k == kind::kListSites) {
    auto members = Members(request.token);
    std::vector<SiteInfo> sites;
    for (const auto& [name, address] : members) sites.push_back({name, address});
    response.payload = Json{{"sites", SitesToJson(sites)}};
  } else {
    throw Error(ErrorCode::kUnknownKind, k);
  }
  return response;
}

std::map<std::string, std::string> SiteNode::Members(const std::string& token) {
  try {
    Message response = rpc_.Call(config_.central_address, kind::kListSites, token,
                                 Json::object(), config_.rpc_timeout_ms);
    std::map<std::string, std::string> fresh;
    for (const auto& s : SitesFromJson(response.payload.at("sites"))) {
      fresh[s.name] = s.address;
    }
    std::lock_guard<std::mutex> lock(mu_);
    members_ = fresh;
    return fresh;
  } catch (const Error& e) {
    if (!IsTransportFailure(e)) throw;
    std::lock_guard<std::mutex> lock(mu_);
    return members_;
  }
}

std::string SiteNode::AddressOf(const std::string& site, const std::string& token) {
  auto members = Members(token);
  auto it = members.find(site);
  if (it == members.end()) throw Error(ErrorCode::kUnknownSite, site);
  return it->second;
}

std::string SiteNode::PayloadBytes(const Json& payload) {
  if (payload.contains("data")) return Base64Decode(Str(payload, "data"));
  if (!payload.contains("upload_id")) {
    throw Error(ErrorCode::kInvalidArgument, "need 'data' or 'upload_id'");
  }
  std::string upload_id = Str(payload, "upload_id");
  std::shared_ptr<Upload> upload;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = uploads_.find(upload_id);
    if (it == uploads_.end()) throw Error(ErrorCode::kNotFound, "upload " + upload_id);
    upload = it->second;
  }
  std::lock_guard<std::mutex> ulock(upload->mu);
  if (!upload->finished || upload->incoming) {
    throw Error(ErrorCode::kInvalidArgument, "upload " + upload_id + " not finished");
  }
  std::string bytes = std::move(upload->buffer);
  std::lock_guard<std::mutex> lock(mu_);
  uploads_.erase(upload_id);
  return bytes;
}

Json SiteNode::HandleAdd(const Message& request) {
  std::string bytes = PayloadBytes(request.payload);
  DicomFile file = ParseDicom(bytes);
  auto study = file.GetText(tags::kStudyDate);
  auto date = study ? Date::Parse(*study) : std::nullopt;
  if (!date) {
    throw Error(ErrorCode::kInvariantViolation, "StudyDate (0008,0020) missing or invalid");
  }
  Anonymized anon = Anonymize(file, config_.salt, *date);
  std::string stored = WriteDicom(anon.file);

  ImageRegistration reg;
  reg.meta = ExtractImageMeta(anon.file);
  if (!IsValidLfnName(reg.meta.sop_uid)) {
    throw Error(ErrorCode::kInvalidArgument,
                "SOPInstanceUID '" + reg.meta.sop_uid + "' is not a valid file name");
  }
  reg.lfn = Lfn{config_.name, LfnCategory::kImages, reg.meta.sop_uid};
  reg.kind = ImageKind::kOriginal;
  reg.size_bytes = stored.size();
  reg.checksum = Checksum(stored);

  std::lock_guard<std::mutex> lock(ingest_mu_);
  catalog_->CheckImage(reg);
  try {
    storage_->Put(reg.lfn, stored);
  } catch (const Error& e) {
    // Blob left behind by an ingest that died before registering.
    auto info = storage_->Stat(reg.lfn);
    if (e.code() != ErrorCode::kAlreadyExists || !info ||
        info->checksum != reg.checksum) {
      throw;
    }
  }
  ImageRow row = catalog_->RegisterImage(reg);
  return Json{{"lfn", row.lfn},
              {"sop_uid", row.sop_uid},
              {"pseudonym", row.pseudonym},
              {"size", row.size_bytes},
              {"checksum", row.checksum}};
}

void SiteNode::FetchReplica(const Lfn& lfn, const std::string& token) {
  std::lock_guard<std::mutex> lock(replica_mu_);
  if (storage_->Contains(lfn)) return;
  const std::string address = AddressOf(lfn.site, token);
  auto fetch = [&](std::size_t chunk) {
    return rpc_.Call(address, kind::kRetrieve, token,
                     Json{{"lfn", lfn.ToString()}, {"chunk", chunk}},
                     config_.rpc_timeout_ms)
        .payload;
  };
  Json first = fetch(0);
  const std::size_t chunks = first.at("chunks").get<std::size_t>();
  auto incoming = storage_->BeginIncoming(lfn, first.at("size").get<std::uint64_t>(),
                                          Str(first, "checksum"));
  incoming.Append(Base64Decode(Str(first, "data")));
  for (std::size_t i = 1; i < chunks; ++i) {
    incoming.Append(Base64Decode(Str(fetch(i), "data")));
  }
  incoming.Commit();
}

Json SiteNode::HandleRetrieve(const Message& request) {
  const Lfn lfn = Lfn::Parse(Str(request.payload, "lfn"));
  const std::size_t chunk = request.payload.value("chunk", std::size_t{0});
  if (lfn.site == kBuiltinSite) {
    throw Error(ErrorCode::kNotFound, lfn.ToString() + " is compiled in");
  }
  if (lfn.site == config_.name) {
    catalog_->LookupLfn(lfn.ToString());
  } else if (!storage_->Contains(lfn)) {
    FetchReplica(lfn, request.token);
  }
  auto info = storage_->Stat(lfn);
  if (!info) throw Error(ErrorCode::kNotFound, lfn.ToString());
  const std::size_t chunks = ChunkCount(info->size);
  if (chunk >= chunks) {
    throw Error(ErrorCode::kInvalidArgument,
                "chunk " + std::to_string(chunk) + " of " + std::to_string(chunks));
  }
  std::string data;
  if (chunk == 0) {
    // Whole-blob verification once per download.
    data = storage_->Get(lfn);
    data.resize(std::min<std::size_t>(data.size(), kChunkSize));
  } else {
    data = storage_->ReadChunk(lfn, chunk);
  }
  return Json{{"lfn", lfn.ToString()},
              {"size", info->size},
              {"checksum", info->checksum},
              {"chunk", chunk},
              {"chunks", chunks},
              {"data", Base64Encode(data)}};
}

Json SiteNode::HandleQuery(const Message& request) {
  FormalQuery q = Canonicalize(ParseQuery(Str(request.payload, "query")));
  ResultSet result;
  if (q.scope == Scope::kLocalOnly) {
    result.query_id = ids_.Hex16();
    result.sites.push_back(HandleRemote(q, *catalog_, clock_));
  } else {
    Federation federation(*this, request.token);
    result = ExecuteFederated(q, federation, config_.federation);
  }
  return Json{{"xml", SerializeResultSet(result)}};
}

Json SiteNode::HandleQueryRemote(const Message& request) {
  FormalQuery q = Canonicalize(ParseQuery(Str(request.payload, "query")));
  SiteResult result = HandleRemote(q, *catalog_, clock_);
  return Json{{"query_id", request.payload.value("query_id", "")},
              {"site_result", SerializeSiteResult(result)}};
}

Json SiteNode::HandleAddAlg(const Message& request) {
  const Json& p = request.payload;
  AlgorithmRow row;
  row.name = Str(p, "name");
  row.version = Str(p, "version");
  if (p.contains("builtin")) {
    std::string id = Str(p, "builtin");
    if (!IsBuiltinAlgorithm(id)) throw Error(ErrorCode::kAlgorithmNotFound, id);
    row.lfn = BuiltinLfn(id).ToString();
    row.checksum = BuiltinChecksum(id);
    row.builtin = true;
    row = catalog_->RegisterAlgorithm(row);
  } else {
    std::string bytes = PayloadBytes(p);
    Lfn lfn = AlgorithmLfn(config_.name, row.name, row.version);
    row.lfn = lfn.ToString();
    row.checksum = Checksum(bytes);
    std::lock_guard<std::mutex> lock(ingest_mu_);
    if (auto existing = catalog_->FindAlgorithm(row.name, row.version)) {
      row = catalog_->RegisterAlgorithm(row);  // idempotent or VersionConflict
    } else {
      try {
        storage_->Put(lfn, bytes);
      } catch (const Error& e) {
        auto info = storage_->Stat(lfn);
        if (e.code() != ErrorCode::kAlreadyExists || !info ||
            info->checksum != row.checksum) {
          throw;
        }
      }
      row = catalog_->RegisterAlgorithm(row);
    }
  }
  return Json{{"lfn", row.lfn}, {"checksum", row.checksum}, {"builtin", row.builtin}};
}

void SiteNode::PushFile(const Lfn& lfn, const std::string& address,
                        const std::string& token) {
  auto info = storage_->Stat(lfn);
  if (!info) throw Error(ErrorCode::kAlgorithmNotFound, lfn.ToString() + " has no bytes here");
  std::string upload_id;
  try {
    upload_id = Str(rpc_.Call(address, kind::kFilePutBegin, token,
                              Json{{"lfn", lfn.ToString()},
                                   {"size", info->size},
                                   {"checksum", info->checksum}},
                              config_.rpc_timeout_ms)
                        .payload,
                    "upload_id");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kDestinationExists) return;
    throw;
  }
  const std::size_t chunks = ChunkCount(info->size);
  for (std::size_t i = 0; i < chunks; ++i) {
    std::string data = info->size == 0 ? std::string() : storage_->ReadChunk(lfn, i);
    rpc_.Call(address, kind::kFileChunk, token,
              Json{{"upload_id", upload_id}, {"seq", i}, {"data", Base64Encode(data)}},
              config_.rpc_timeout_ms);
  }
  rpc_.Call(address, kind::kFilePutEnd, token, Json{{"upload_id", upload_id}},
            config_.rpc_timeout_ms);
}

Json SiteNode::HandleExecAlg(const Message& request) {
  const Json& p = request.payload;
  const std::string name = Str(p, "name");
  const std::string version = Str(p, "version");
  auto input = Lfn::TryParse(Str(p, "input_lfn"));
  if (!input) throw Error(ErrorCode::kInputNotFound, Str(p, "input_lfn"));

  AlgorithmRow algorithm;
  const bool forwarded = p.contains("algorithm");
  if (forwarded) {
    algorithm = AlgorithmFromJson(p.at("algorithm"));
    if (algorithm.name != name || algorithm.version != version) {
      throw Error(ErrorCode::kInvalidArgument, "algorithm descriptor mismatch");
    }
  } else if (auto found = catalog_->FindAlgorithm(name, version)) {
    algorithm = *found;
  } else {
    throw Error(ErrorCode::kAlgorithmNotFound, name + " " + version);
  }

  if (input->site != config_.name) {
    if (forwarded) {
      throw Error(ErrorCode::kInputNotFound,
                  input->ToString() + " is not owned by " + config_.name);
    }
    std::string address;
    try {
      address = AddressOf(input->site, request.token);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUnknownSite) throw;
      throw Error(ErrorCode::kInputNotFound, input->ToString());
    }
    // Move the code to the data.
    if (!algorithm.builtin) PushFile(Lfn::Parse(algorithm.lfn), address, request.token);
    Json forward = p;
    forward["algorithm"] = AlgorithmToJson(algorithm);
    return rpc_.Call(address, kind::kExecAlg, request.token, forward,
                     config_.rpc_timeout_ms)
        .payload;
  }
  if (forwarded) catalog_->RegisterAlgorithm(algorithm);
  return JobToJson(compute_->Execute(algorithm, *input));
}

Json SiteNode::HandleFilePutBegin(const Message& request) {
  const Json& p = request.payload;
  auto upload = std::make_shared<Upload>();
  upload->size = p.at("size").get<std::uint64_t>();
  upload->checksum = Str(p, "checksum");
  if (!IsHex16(upload->checksum)) {
    throw Error(ErrorCode::kInvalidArgument, "checksum must be 16 hex digits");
  }
  if (p.contains("lfn")) {
    Lfn lfn = Lfn::Parse(Str(p, "lfn"));
    if (lfn.site == config_.name || lfn.site == kBuiltinSite) {
      throw Error(ErrorCode::kInvalidArgument,
                  "owned files enter through ADD or ADD_ALG");
    }
    upload->incoming.emplace(storage_->BeginIncoming(lfn, upload->size, upload->checksum));
  } else {
    // Staged in memory until an ADD or ADD_ALG consumes it.
    if (upload->size > 64u * 1024 * 1024) {
      throw Error(ErrorCode::kInvalidArgument, "upload larger than 64 MiB");
    }
    upload->buffer.reserve(upload->size);
  }
  std::string id = ids_.Hex16();
  std::lock_guard<std::mutex> lock(mu_);
  uploads_[id] = upload;
  return Json{{"upload_id", id}};
}

Json SiteNode::HandleFileChunk(const Message& request) {
  const Json& p = request.payload;
  const std::string id = Str(p, "upload_id");
  std::shared_ptr<Upload> upload;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = uploads_.find(id);
    if (it == uploads_.end()) throw Error(ErrorCode::kNotFound, "upload " + id);
    upload = it->second;
  }
  const std::size_t seq = p.at("seq").get<std::size_t>();
  std::string data = Base64Decode(Str(p, "data"));
  std::lock_guard<std::mutex> ulock(upload->mu);
  if (upload->finished) throw Error(ErrorCode::kInvalidArgument, "upload finished");
  if (seq != upload->next_seq) {
    throw Error(ErrorCode::kInvalidArgument, "expected chunk " +
                                                 std::to_string(upload->next_seq) +
                                                 ", got " + std::to_string(seq));
  }
  if (data.size() > kChunkSize || upload->received + data.size() > upload->size) {
    throw Error(ErrorCode::kInvalidArgument, "chunk overruns the declared size");
  }
  if (upload->incoming) {
    upload->incoming->Append(data);
  } else {
    if (upload->next_seq > 0 && upload->buffer.size() % kChunkSize != 0) {
      throw Error(ErrorCode::kInvalidArgument, "short chunk before the last");
    }
    upload->buffer += data;
  }
  upload->received += data.size();
  ++upload->next_seq;
  return Json{{"upload_id", id}, {"seq", seq}, {"received", upload->received}};
}

Json SiteNode::HandleFilePutEnd(const Message& request) {
  const std::string id = Str(request.payload, "upload_id");
  std::shared_ptr<Upload> upload;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = uploads_.find(id);
    if (it == uploads_.end()) throw Error(ErrorCode::kNotFound, "upload " + id);
    upload = it->second;
  }
  std::unique_lock<std::mutex> ulock(upload->mu);
  auto drop = [&] {
    std::lock_guard<std::mutex> lock(mu_);
    uploads_.erase(id);
  };
  if (upload->incoming) {
    std::string checksum;
    try {
      checksum = upload->incoming->Commit();
    } catch (...) {
      upload->incoming.reset();
      drop();
      throw;
    }
    upload->incoming.reset();
    drop();
    return Json{{"upload_id", id}, {"size", upload->size}, {"checksum", checksum}};
  }
  if (upload->buffer.size() != upload->size ||
      Checksum(upload->buffer) != upload->checksum) {
    drop();
    throw Error(ErrorCode::kChecksumMismatch, "upload " + id);
  }
  upload->finished = true;
  return Json{{"upload_id", id}, {"size", upload->size}, {"checksum", upload->checksum}};
}

}  // namespace mgvo
