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

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mgvo {

enum class Target { kPatients, kImages };
enum class Scope { kFederated, kLocalOnly };
enum class Op { kEq, kBetween };

// Declared in attribute-name order so sorting by enum value sorts by name.
enum class Attr {
  kImageKind,        // image.kind
  kImageLaterality,  // image.laterality
  kImageStudyDate,   // image.study_date
  kPatientAge,       // patient.age
  kPatientId,        // patient.id
  kPatientSex,       // patient.sex
};

inline constexpr std::array<Attr, 6> kAllAttrs{
    Attr::kImageKind,  Attr::kImageLaterality, Attr::kImageStudyDate,
    Attr::kPatientAge, Attr::kPatientId,       Attr::kPatientSex};

std::string_view AttrName(Attr attr);
std::optional<Attr> AttrFromName(std::string_view name);
bool IsImageAttr(Attr attr);
bool IsRangeAttr(Attr attr);

std::string_view TargetName(Target target);

struct Predicate {
  Attr attr = Attr::kPatientSex;
  Op op = Op::kEq;
  // Normalized operands: ages without leading zeros, dates as YYYYMMDD.
  // `hi` is empty for EQ.
  std::string lo;
  std::string hi;

  bool operator==(const Predicate&) const = default;
};

struct FormalQuery {
  Target target = Target::kPatients;
  std::vector<Predicate> conjuncts;
  Scope scope = Scope::kFederated;

  const Predicate* Find(Attr attr) const;

  // Conjunct order is not semantic.
  bool operator==(const FormalQuery& other) const;
};

// Checks the invariants of a programmatically built query and brings its
// operands and conjunct order into canonical form. Throws DuplicateAttribute,
// DomainError, RangeInverted or InvalidArgument (empty conjunction).
FormalQuery Canonicalize(FormalQuery q);

// `SELECT <target> WHERE <term> {AND <term>} [/*LOCAL*/]` where
// term := <attr> = '<literal>' | <attr> BETWEEN <lo> AND <hi>.
// Keywords are case-insensitive. Errors: SyntaxError (with byte position),
// UnknownAttribute, DuplicateAttribute, DomainError, RangeInverted.
FormalQuery ParseQuery(std::string_view text);

// Uppercase keywords, conjuncts sorted by attribute name, single spaces;
// LOCAL_ONLY queries carry a trailing " /*LOCAL*/".
std::string SerializeQuery(const FormalQuery& q);

}  // namespace mgvo
