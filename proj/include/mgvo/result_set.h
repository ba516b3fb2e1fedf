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
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mgvo/query.h"

namespace mgvo {

// (field name, value) pairs in the fixed per-target order.
using Row = std::vector<std::pair<std::string, std::string>>;

// site, patient.id, patient.sex, patient.age  (PATIENTS)
// site, image.sop_uid, image.lfn, image.kind, image.laterality,
// image.study_date, patient.id                 (IMAGES)
std::span<const std::string_view> RowFields(Target target);

enum class SiteStatus { kOk, kError };

struct SiteResult {
  std::string site;
  SiteStatus status = SiteStatus::kOk;
  std::vector<Row> rows;  // kOk only
  std::string message;    // kError only
  std::int64_t elapsed_ms = 0;

  static SiteResult Ok(std::string site, std::vector<Row> rows,
                       std::int64_t elapsed_ms);
  static SiteResult Failed(std::string site, std::string message,
                           std::int64_t elapsed_ms);

  bool operator==(const SiteResult&) const = default;
};

struct ResultSet {
  std::string query_id;
  std::vector<SiteResult> sites;

  std::size_t RowCount() const;
  std::size_t ErrorCount() const;
  const SiteResult* FindSite(std::string_view name) const;

  bool operator==(const ResultSet&) const = default;
};

// <resultset query-id="HEX16"><site name=".." status="ok|error"
// elapsed-ms=".."><row><f n="FIELD">VALUE</f>...</row></site>...</resultset>
// with no whitespace between elements. Element-free nodes self-close.
std::string SerializeResultSet(const ResultSet& r);
std::string SerializeSiteResult(const SiteResult& s);

// Inverse of the serializers. Errors: XmlSyntaxError (with byte position),
// SchemaError.
ResultSet ParseResultSet(std::string_view xml);
SiteResult ParseSiteResult(std::string_view xml);

// Result Handler: concatenates parts in arrival order. DuplicateSite when a
// site contributes twice.
ResultSet MergeResults(std::vector<SiteResult> parts, std::string query_id);

std::string XmlEscape(std::string_view text);

}  // namespace mgvo
