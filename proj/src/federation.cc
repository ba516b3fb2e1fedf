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

#include "mgvo/federation.h"

#include <algorithm>
#include <future>
#include <mutex>

#include "mgvo/error.h"

namespace mgvo {

QueryPlan Analyze(const FormalQuery& q, const std::string& origin,
                  std::vector<std::string> members, std::string query_id) {
  if (q.scope != Scope::kFederated) {
    throw Error(ErrorCode::kScopeViolation,
                "analyzer accepts FEDERATED queries only");
  }
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  if (!std::binary_search(members.begin(), members.end(), origin)) {
    throw Error(ErrorCode::kNotAMember, origin);
  }
  FormalQuery part = q;
  part.scope = Scope::kLocalOnly;
  QueryPlan plan{std::move(query_id), part, {}, origin};
  for (const auto& site : members) {
    if (site != origin) plan.remote_parts.emplace_back(site, part);
  }
  return plan;
}

ResultSet ExecuteFederated(const FormalQuery& q, FederationContext& ctx,
                           const FederationConfig& config) {
  QueryPlan plan =
      Analyze(q, ctx.origin(), ctx.RefreshMembers(), ctx.NewQueryId());

  std::vector<SiteResult> parts;
  parts.reserve(plan.remote_parts.size() + 1);

  const std::int64_t start = ctx.NowMs();
  try {
    parts.push_back(SiteResult::Ok(plan.origin_site,
                                   ctx.LocalQuery(plan.local_part),
                                   ctx.NowMs() - start));
  } catch (const std::exception& e) {
    parts.push_back(
        SiteResult::Failed(plan.origin_site, e.what(), ctx.NowMs() - start));
  }

  if (!config.fanout_parallel || plan.remote_parts.size() <= 1) {
    for (const auto& [site, part] : plan.remote_parts) {
      parts.push_back(ctx.QueryRemote(site, plan.query_id, SerializeQuery(part),
                                      config.per_site_timeout_ms));
    }
  } else {
    // One in-flight request per remote site; results are appended as they
    // arrive.
    std::mutex mu;
    std::vector<std::future<void>> pending;
    pending.reserve(plan.remote_parts.size());
    for (const auto& [site, part] : plan.remote_parts) {
      pending.push_back(std::async(std::launch::async, [&, site = site,
                                                        text = SerializeQuery(part)] {
        SiteResult r = ctx.QueryRemote(site, plan.query_id, text,
                                       config.per_site_timeout_ms);
        std::lock_guard<std::mutex> lock(mu);
        parts.push_back(std::move(r));
      }));
    }
    for (auto& f : pending) f.get();
  }
  return MergeResults(std::move(parts), plan.query_id);
}

SiteResult HandleRemote(const FormalQuery& q, const Catalog& catalog,
                        const Clock& clock) {
  if (q.scope != Scope::kLocalOnly) {
    throw Error(ErrorCode::kScopeViolation,
                "FEDERATED query reached the remote handler of " +
                    catalog.site());
  }
  const std::int64_t start = clock.NowMs();
  auto rows = catalog.LocalQuery(q);
  return SiteResult::Ok(catalog.site(), std::move(rows), clock.NowMs() - start);
}

}  // namespace mgvo
