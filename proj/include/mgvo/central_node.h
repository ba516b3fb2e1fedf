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
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mgvo/clock.h"
#include "mgvo/transport.h"
#include "mgvo/wire.h"

namespace mgvo {

inline constexpr std::int64_t kSessionLifetimeMs = 3600 * 1000;

struct SiteInfo {
  std::string name;
  std::string address;

  bool operator==(const SiteInfo&) const = default;
};

Json SitesToJson(const std::vector<SiteInfo>& sites);
std::vector<SiteInfo> SitesFromJson(const Json& j);

struct SessionToken {
  std::string user;
  std::string token;  // 32 lowercase hex
  std::int64_t expires_at_ms = 0;
};

// Random identifiers: deterministic from a seed (tests, harness) or seeded
// from the OS entropy source.
class IdSource {
 public:
  explicit IdSource(std::optional<std::uint64_t> seed = std::nullopt);
  std::uint64_t Next64();
  std::string Hex16();
  std::string Hex32();

 private:
  std::mutex mu_;
  std::mt19937_64 rng_;
};

// The VO's central node: user registry, session tokens, and the
// authoritative member-site list. Secrets are stored as
// fnv1a64(salt ++ secret), which is not a cryptographic digest.
class CentralNode : public Endpoint {
 public:
  explicit CentralNode(const Clock& clock,
                       std::optional<std::uint64_t> seed = std::nullopt);

  void AddUser(const std::string& user, std::string_view secret);

  // Errors: UnknownUser, BadSecret.
  SessionToken Authenticate(std::string_view user, std::string_view secret);
  // Errors: InvalidToken, Expired.
  SessionToken Validate(std::string_view token) const;
  void Revoke(std::string_view token);

  // Errors: DuplicateSite, InvalidArgument (malformed name).
  std::vector<SiteInfo> RegisterSite(const SiteInfo& info);
  // Sorted by name.
  std::vector<SiteInfo> ListSites() const;

  // AUTH and REGISTER_SITE are open; every other kind needs a live token.
  std::string HandleFrame(std::string_view frame) override;

 private:
  struct User {
    std::string salt;
    std::string digest;
  };

  Message Dispatch(const Message& request);

  const Clock& clock_;
  IdSource ids_;
  mutable std::mutex mu_;
  std::map<std::string, User> users_;
  std::map<std::string, SessionToken> sessions_;
  std::map<std::string, SiteInfo> sites_;
};

}  // namespace mgvo
