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

#include "mgvo/harness.h"

#include <charconv>
#include <sstream>

#include "mgvo/error.h"
#include "mgvo/fnv.h"

namespace mgvo {

namespace fs = std::filesystem;

Fault Fault::Parse(std::string_view text) {
  if (text == "HALT") return Halt();
  constexpr std::string_view kPrefix = "DELAY(";
  if (text.size() > kPrefix.size() + 1 && text.substr(0, kPrefix.size()) == kPrefix &&
      text.back() == ')') {
    std::string_view digits = text.substr(kPrefix.size(), text.size() - kPrefix.size() - 1);
    std::int64_t ms = 0;
    auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), ms);
    if (ec == std::errc() && end == digits.data() + digits.size() && ms >= 0) {
      return Delay(ms);
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "bad fault '" + std::string(text) + "'");
}

std::string Fault::ToString() const {
  if (kind == Kind::kHalt) return "HALT";
  return "DELAY(" + std::to_string(delay_ms) + ")";
}

void InProcessNetwork::Register(const std::string& address, Endpoint* endpoint) {
  std::lock_guard<std::mutex> lock(mu_);
  endpoints_[address] = endpoint;
}

void InProcessNetwork::Unregister(const std::string& address) {
  std::lock_guard<std::mutex> lock(mu_);
  endpoints_.erase(address);
}

void InProcessNetwork::SetFault(const std::string& address,
                                std::optional<Fault> fault) {
  std::lock_guard<std::mutex> lock(mu_);
  if (fault) {
    faults_[address] = *fault;
  } else {
    faults_.erase(address);
  }
}

namespace {

// The kind of an encoded frame without a full JSON parse.
std::string FrameKind(const std::string& frame) {
  constexpr std::string_view kKey = "\"kind\":\"";
  auto at = frame.find(kKey, 4);
  if (at == std::string::npos) return "?";
  auto start = at + kKey.size();
  auto end = frame.find('"', start);
  if (end == std::string::npos) return "?";
  return frame.substr(start, end - start);
}

}  // namespace

void InProcessNetwork::Record(std::string_view from, std::string_view to,
                              const std::string& frame) {
  std::lock_guard<std::mutex> lock(mu_);
  trace_.push_back(TraceEntry{++seq_, std::string(from), std::string(to),
                              FrameKind(frame), frame.size()});
}

CallOutcome InProcessNetwork::Call(std::string_view from, const std::string& address,
                                   const std::string& frame,
                                   std::int64_t timeout_ms) {
  Endpoint* endpoint = nullptr;
  std::optional<Fault> fault;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = endpoints_.find(address); it != endpoints_.end()) {
      endpoint = it->second;
    }
    if (auto it = faults_.find(address); it != faults_.end()) fault = it->second;
  }
  Record(from, address, frame);
  CallOutcome outcome;
  if (endpoint == nullptr || (fault && fault->kind == Fault::Kind::kHalt)) {
    outcome.status = CallOutcome::Status::kUnreachable;
    return outcome;
  }
  const std::int64_t latency = fault ? fault->delay_ms : 0;
  std::string response = endpoint->HandleFrame(frame);
  if (latency > timeout_ms) {
    outcome.status = CallOutcome::Status::kTimeout;
    outcome.elapsed_ms = timeout_ms;
    return outcome;
  }
  Record(address, from, response);
  outcome.response = std::move(response);
  outcome.elapsed_ms = latency;
  return outcome;
}

std::vector<TraceEntry> InProcessNetwork::Trace() const {
  std::lock_guard<std::mutex> lock(mu_);
  return trace_;
}

std::string InProcessNetwork::DumpTrace() const {
  std::ostringstream out;
  for (const auto& e : Trace()) {
    out << e.seq << '|' << e.from << '|' << e.to << '|' << e.kind << '|' << e.bytes
        << '\n';
  }
  return out.str();
}

void InProcessNetwork::ClearTrace() {
  std::lock_guard<std::mutex> lock(mu_);
  trace_.clear();
  seq_ = 0;
}

std::size_t InProcessNetwork::CountKind(std::string_view kind) const {
  std::lock_guard<std::mutex> lock(mu_);
  std::size_t n = 0;
  for (const auto& e : trace_) n += e.kind == kind ? 1 : 0;
  return n;
}

VirtualOrganisation::VirtualOrganisation(VoOptions options)
    : options_(std::move(options)), client_(network_, "harness") {
  if (options_.root.empty()) {
    IdSource ids;
    root_ = fs::temp_directory_path() / ("mgvo-vo-" + ids.Hex16());
    owns_root_ = true;
  } else {
    root_ = options_.root;
  }
  fs::create_directories(root_);
  central_ = std::make_unique<CentralNode>(clock_, options_.seed);
  network_.Register(std::string(kCentralAddress), central_.get());
}

VirtualOrganisation::~VirtualOrganisation() {
  sites_.clear();
  central_.reset();
  if (owns_root_) {
    std::error_code ec;
    fs::remove_all(root_, ec);
  }
}

std::string VirtualOrganisation::AddressOf(std::string_view site) {
  return "inproc://" + std::string(site);
}

SiteNode& VirtualOrganisation::AddSite(const std::string& name,
                                       const std::string& salt) {
  if (sites_.count(name) != 0) throw Error(ErrorCode::kDuplicateSite, name);
  SiteNodeConfig config;
  config.name = name;
  config.address = AddressOf(name);
  config.central_address = std::string(kCentralAddress);
  config.store_root = root_ / name;
  config.salt = salt;
  config.federation = options_.federation;
  config.sync_writes = options_.sync_writes;
  config.seed = options_.seed ^ Fnv1a64(name);
  auto node = std::make_unique<SiteNode>(config, network_, clock_);
  network_.Register(config.address, node.get());
  try {
    node->Start();
  } catch (...) {
    network_.Unregister(config.address);
    throw;
  }
  SiteNode& ref = *node;
  sites_[name] = std::move(node);
  return ref;
}

SiteNode& VirtualOrganisation::site(const std::string& name) {
  auto it = sites_.find(name);
  if (it == sites_.end()) throw Error(ErrorCode::kUnknownSite, name);
  return *it->second;
}

std::vector<std::string> VirtualOrganisation::site_names() const {
  std::vector<std::string> names;
  for (const auto& [name, node] : sites_) names.push_back(name);
  return names;
}

void VirtualOrganisation::AddUser(const std::string& user, std::string_view secret) {
  central_->AddUser(user, secret);
}

std::string VirtualOrganisation::Login(const std::string& site,
                                       const std::string& user,
                                       const std::string& secret) {
  return Request(site, kind::kAuth, "", Json{{"user", user}, {"secret", secret}})
      .payload.at("token")
      .get<std::string>();
}

Message VirtualOrganisation::Request(const std::string& site, std::string_view kind,
                                     const std::string& token, Json payload) {
  this->site(site);
  return client_.Call(AddressOf(site), kind, token, std::move(payload));
}

Message VirtualOrganisation::RequestRaw(const std::string& site,
                                        std::string_view kind,
                                        const std::string& token, Json payload) {
  this->site(site);
  Message request{std::string(kind), token, client_.NextId(), std::move(payload)};
  CallOutcome outcome = client_.CallRaw(AddressOf(site), request, 30000);
  if (outcome.status == CallOutcome::Status::kUnreachable) {
    throw Error(ErrorCode::kUnreachable, site);
  }
  if (outcome.status == CallOutcome::Status::kTimeout) {
    throw Error(ErrorCode::kTimeout, site);
  }
  return DecodeFrame(outcome.response);
}

ResultSet VirtualOrganisation::Query(const std::string& site,
                                     const std::string& token,
                                     const std::string& text) {
  Message response = Request(site, kind::kQuery, token, Json{{"query", text}});
  return ParseResultSet(response.payload.at("xml").get<std::string>());
}

std::string VirtualOrganisation::Add(const std::string& site,
                                     const std::string& token,
                                     std::string_view dicom_bytes) {
  Message response =
      Request(site, kind::kAdd, token, Json{{"data", Base64Encode(dicom_bytes)}});
  return response.payload.at("lfn").get<std::string>();
}

void VirtualOrganisation::InjectFault(const std::string& site, Fault fault) {
  this->site(site);
  network_.SetFault(AddressOf(site), fault);
}

void VirtualOrganisation::ClearFault(const std::string& site) {
  this->site(site);
  network_.SetFault(AddressOf(site), std::nullopt);
}

}  // namespace mgvo
