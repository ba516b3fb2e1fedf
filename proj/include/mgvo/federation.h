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
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mgvo/catalog.h"
#include "mgvo/clock.h"
#include "mgvo/query.h"
#include "mgvo/result_set.h"

namespace mgvo {

// Output of the query analyzer. Every part is LOCAL_ONLY: a remote site
// receiving it evaluates locally and never forwards, which bounds a
// federated query to |members| - 1 remote requests.
struct QueryPlan {
  std::string query_id;
  FormalQuery local_part;
  std::vector<std::pair<std::string, FormalQuery>> remote_parts;  // by name
  std::string origin_site;
};

struct FederationConfig {
  std::int64_t per_site_timeout_ms = 5000;
  bool fanout_parallel = true;
};

// Errors: ScopeViolation (q is not FEDERATED), NotAMember (origin missing
// from members).
QueryPlan Analyze(const FormalQuery& q, const std::string& origin,
                  std::vector<std::string> members, std::string query_id);

// What the federation engine needs from the node it runs on.
class FederationContext {
 public:
  virtual ~FederationContext() = default;

  virtual const std::string& origin() const = 0;
  // Current VO membership, refreshed from the central node where possible.
  virtual std::vector<std::string> RefreshMembers() = 0;
  virtual std::string NewQueryId() = 0;
  virtual std::vector<Row> LocalQuery(const FormalQuery& q) = 0;
  // Ships `canonical_query` to `site`. Never throws: transport failures come
  // back as ERROR results ("unreachable", "timeout", or the remote error).
  virtual SiteResult QueryRemote(const std::string& site,
                                 const std::string& query_id,
                                 const std::string& canonical_query,
                                 std::int64_t timeout_ms) = 0;
  virtual std::int64_t NowMs() const = 0;
};

// Runs the local part, fans the remote parts out and merges the per-site
// results: the origin first, then remote sites in arrival order (name
// order when fan-out is sequential). Site failures become ERROR entries.
ResultSet ExecuteFederated(const FormalQuery& q, FederationContext& ctx,
                           const FederationConfig& config);

// Remote query handler. Errors: ScopeViolation for a FEDERATED query.
SiteResult HandleRemote(const FormalQuery& q, const Catalog& catalog,
                        const Clock& clock);

}  // namespace mgvo
