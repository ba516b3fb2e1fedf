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

#include "mgvo/central_node.h"

#include "mgvo/error.h"
#include "mgvo/fnv.h"
#include "mgvo/lfn.h"

namespace mgvo {

Json SitesToJson(const std::vector<SiteInfo>& sites) {
  Json out = Json::array();
  for (const auto& s : sites) {
    out.push_back(Json{{"name", s.name}, {"address", s.address}});
  }
  return out;
}

std::vector<SiteInfo> SitesFromJson(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kMalformedFrame, "sites must be an array");
  std::vector<SiteInfo> out;
  for (const auto& s : j) {
    out.push_back(SiteInfo{s.at("name").get<std::string>(),
                           s.at("address").get<std::string>()});
  }
  return out;
}

IdSource::IdSource(std::optional<std::uint64_t> seed)
    : rng_(seed ? *seed : std::random_device{}() ^
                              (std::uint64_t{std::random_device{}()} << 32)) {}

std::uint64_t IdSource::Next64() {
  std::lock_guard<std::mutex> lock(mu_);
  return rng_();
}

std::string IdSource::Hex16() { return Hex64(Next64()); }

std::string IdSource::Hex32() { return Hex16() + Hex16(); }

CentralNode::CentralNode(const Clock& clock, std::optional<std::uint64_t> seed)
    : clock_(clock), ids_(seed) {}

void CentralNode::AddUser(const std::string& user, std::string_view secret) {
  std::string salt = ids_.Hex16();
  std::string digest = Checksum(salt + std::string(secret));
  std::lock_guard<std::mutex> lock(mu_);
  users_[user] = User{std::move(salt), std::move(digest)};
}

SessionToken CentralNode::Authenticate(std::string_view user,
                                       std::string_view secret) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = users_.find(std::string(user));
  if (it == users_.end()) throw Error(ErrorCode::kUnknownUser, std::string(user));
  if (Checksum(it->second.salt + std::string(secret)) != it->second.digest) {
    throw Error(ErrorCode::kBadSecret, std::string(user));
  }
  SessionToken session;
  do {
    session.token = ids_.Hex32();
  } while (sessions_.count(session.token) != 0);
  session.user = std::string(user);
  session.expires_at_ms = clock_.NowMs() + kSessionLifetimeMs;
  sessions_[session.token] = session;
  return session;
}

SessionToken CentralNode::Validate(std::string_view token) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = sessions_.find(std::string(token));
  if (it == sessions_.end()) throw Error(ErrorCode::kInvalidToken, "unknown token");
  if (clock_.NowMs() >= it->second.expires_at_ms) {
    throw Error(ErrorCode::kExpired, "session of " + it->second.user);
  }
  return it->second;
}

void CentralNode::Revoke(std::string_view token) {
  std::lock_guard<std::mutex> lock(mu_);
  sessions_.erase(std::string(token));
}

std::vector<SiteInfo> CentralNode::RegisterSite(const SiteInfo& info) {
  if (!IsValidSiteName(info.name) || info.name == kBuiltinSite) {
    throw Error(ErrorCode::kInvalidArgument, "bad site name '" + info.name + "'");
  }
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (!sites_.emplace(info.name, info).second) {
      throw Error(ErrorCode::kDuplicateSite, info.name);
    }
  }
  return ListSites();
}

std::vector<SiteInfo> CentralNode::ListSites() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<SiteInfo> out;
  for (const auto& [name, info] : sites_) out.push_back(info);
  return out;
}

Message CentralNode::Dispatch(const Message& request) {
  Message response;
  response.kind = ResponseKind(request.kind);
  response.id = request.id;
  const Json& p = request.payload;

  if (request.kind == kind::kAuth) {
    SessionToken s = Authenticate(p.at("user").get<std::string>(),
                                  p.at("secret").get<std::string>());
    response.payload = {{"user", s.user},
                        {"token", s.token},
                        {"expires_at", s.expires_at_ms}};
    return response;
  }
  if (request.kind == kind::kRegisterSite) {
    auto sites = RegisterSite(SiteInfo{p.at("name").get<std::string>(),
                                       p.at("address").get<std::string>()});
    response.payload = {{"sites", SitesToJson(sites)}};
    return response;
  }
  if (request.token.empty()) {
    throw Error(ErrorCode::kUnauthenticated, request.kind + " requires a token");
  }
  SessionToken caller = Validate(request.token);
  if (request.kind == kind::kValidateToken) {
    response.payload = {{"user", caller.user},
                        {"expires_at", caller.expires_at_ms}};
  } else if (request.kind == kind::kRevokeToken) {
    Revoke(p.value("token", request.token));
    response.payload = Json::object();
  } else if (request.kind == kind::kListSites) {
    response.payload = {{"sites", SitesToJson(ListSites())}};
  } else {
    throw Error(ErrorCode::kUnknownKind, request.kind);
  }
  return response;
}

std::string CentralNode::HandleFrame(std::string_view frame) {
  std::uint64_t id = 0;
  try {
    Message request = DecodeFrame(frame);
    id = request.id;
    if (!IsKnownKind(request.kind)) {
      throw Error(ErrorCode::kUnknownKind, request.kind);
    }
    return EncodeFrame(Dispatch(request));
  } catch (const Error& e) {
    return EncodeFrame(MakeError(id, ErrorCodeName(e.code()), e.message()));
  } catch (const Json::exception& e) {
    return EncodeFrame(MakeError(id, "MalformedFrame",
                                 std::string("bad payload: ") + e.what()));
  }
}

}  // namespace mgvo
