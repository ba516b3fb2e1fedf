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

#include "mgvo/central_node.h"
#include "mgvo/clock.h"
#include "mgvo/federation.h"
#include "mgvo/result_set.h"
#include "mgvo/site_node.h"
#include "mgvo/transport.h"
#include "mgvo/wire.h"

namespace mgvo {

struct Fault {
  enum class Kind { kHalt, kDelay };
  Kind kind = Kind::kHalt;
  std::int64_t delay_ms = 0;

  static Fault Halt() { return Fault{Kind::kHalt, 0}; }
  static Fault Delay(std::int64_t ms) { return Fault{Kind::kDelay, ms}; }
  // "HALT" or "DELAY(<ms>)". Throws InvalidArgument.
  static Fault Parse(std::string_view text);
  std::string ToString() const;

  bool operator==(const Fault&) const = default;
};

struct TraceEntry {
  std::uint64_t seq = 0;
  std::string from;
  std::string to;
  std::string kind;
  std::size_t bytes = 0;
};

// Delivers frames by calling the target endpoint on the caller's thread.
// HALT refuses delivery; DELAY(ms) is charged as latency, and a latency above
// the caller's timeout turns the (still delivered) call into a timeout.
class InProcessNetwork : public Transport {
 public:
  void Register(const std::string& address, Endpoint* endpoint);
  void Unregister(const std::string& address);
  void SetFault(const std::string& address, std::optional<Fault> fault);

  CallOutcome Call(std::string_view from, const std::string& address,
                   const std::string& frame, std::int64_t timeout_ms) override;

  std::vector<TraceEntry> Trace() const;
  // One `seq|from|to|kind|bytes` line per message, requests and responses.
  std::string DumpTrace() const;
  void ClearTrace();
  std::size_t CountKind(std::string_view kind) const;

 private:
  void Record(std::string_view from, std::string_view to, const std::string& frame);

  mutable std::mutex mu_;
  std::map<std::string, Endpoint*> endpoints_;
  std::map<std::string, Fault> faults_;
  std::vector<TraceEntry> trace_;
  std::uint64_t seq_ = 0;
};

struct VoOptions {
  std::uint64_t seed = 1;
  FederationConfig federation{5000, false};
  bool sync_writes = false;
  // Store roots live here; a fresh temporary directory (removed with the VO)
  // when empty.
  std::filesystem::path root;
};

inline constexpr std::string_view kCentralAddress = "inproc://central";
inline constexpr std::string_view kHarnessUser = "harness";
inline constexpr std::string_view kHarnessSecret = "harness-secret";

// A central node plus site nodes wired over an InProcessNetwork and driven by
// one SimulatedClock.
class VirtualOrganisation {
 public:
  explicit VirtualOrganisation(VoOptions options = {});
  ~VirtualOrganisation();

  VirtualOrganisation(const VirtualOrganisation&) = delete;
  VirtualOrganisation& operator=(const VirtualOrganisation&) = delete;

  static std::string AddressOf(std::string_view site);

  // Creates, registers and starts a site. Errors: DuplicateSite.
  SiteNode& AddSite(const std::string& name, const std::string& salt = "");
  // Errors: UnknownSite.
  SiteNode& site(const std::string& name);
  std::vector<std::string> site_names() const;

  CentralNode& central() { return *central_; }
  InProcessNetwork& network() { return network_; }
  SimulatedClock& clock() { return clock_; }
  const VoOptions& options() const { return options_; }
  const std::filesystem::path& root() const { return root_; }

  void AddUser(const std::string& user, std::string_view secret);
  // AUTH through `site`; returns the session token.
  std::string Login(const std::string& site, const std::string& user,
                    const std::string& secret);

  // Sends one request to `site`; remote errors are thrown as Error.
  Message Request(const std::string& site, std::string_view kind,
                  const std::string& token, Json payload);
  // As Request but returns the decoded response, ERROR frames included.
  Message RequestRaw(const std::string& site, std::string_view kind,
                     const std::string& token, Json payload);

  ResultSet Query(const std::string& site, const std::string& token,
                  const std::string& text);
  // Returns the assigned LFN.
  std::string Add(const std::string& site, const std::string& token,
                  std::string_view dicom_bytes);

  // Errors: UnknownSite.
  void InjectFault(const std::string& site, Fault fault);
  void ClearFault(const std::string& site);
  void AdvanceClock(std::int64_t ms) { clock_.Advance(ms); }

 private:
  VoOptions options_;
  std::filesystem::path root_;
  bool owns_root_ = false;
  SimulatedClock clock_;
  InProcessNetwork network_;
  RpcClient client_;
  std::unique_ptr<CentralNode> central_;
  std::map<std::string, std::unique_ptr<SiteNode>> sites_;
};

}  // namespace mgvo
