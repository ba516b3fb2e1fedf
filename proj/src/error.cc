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

#include "mgvo/error.h"

#include <array>
#include <utility>

namespace mgvo {
namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 45> kNames{{
    {ErrorCode::kInvalidArgument, "InvalidArgument"},
    {ErrorCode::kInvariantViolation, "InvariantViolation"},
    {ErrorCode::kNotFound, "NotFound"},
    {ErrorCode::kIoFailure, "IoFailure"},
    {ErrorCode::kMissingMagic, "MissingMagic"},
    {ErrorCode::kUnsupportedVr, "UnsupportedVR"},
    {ErrorCode::kTruncated, "Truncated"},
    {ErrorCode::kNonMonotonicTag, "NonMonotonicTag"},
    {ErrorCode::kPixelGeometryMismatch, "PixelGeometryMismatch"},
    {ErrorCode::kMissingPatientId, "MissingPatientId"},
    {ErrorCode::kNoPixelData, "NoPixelData"},
    {ErrorCode::kSyntaxError, "SyntaxError"},
    {ErrorCode::kUnknownAttribute, "UnknownAttribute"},
    {ErrorCode::kDuplicateAttribute, "DuplicateAttribute"},
    {ErrorCode::kDomainError, "DomainError"},
    {ErrorCode::kRangeInverted, "RangeInverted"},
    {ErrorCode::kXmlSyntaxError, "XmlSyntaxError"},
    {ErrorCode::kSchemaError, "SchemaError"},
    {ErrorCode::kDuplicateSite, "DuplicateSite"},
    {ErrorCode::kDuplicateSopUid, "DuplicateSopUid"},
    {ErrorCode::kSexMismatch, "SexMismatch"},
    {ErrorCode::kDanglingSource, "DanglingSource"},
    {ErrorCode::kVersionConflict, "VersionConflict"},
    {ErrorCode::kCorruptLog, "CorruptLog"},
    {ErrorCode::kAlreadyExists, "AlreadyExists"},
    {ErrorCode::kWrongSite, "WrongSite"},
    {ErrorCode::kInvalidLfn, "InvalidLfn"},
    {ErrorCode::kChecksumMismatch, "ChecksumMismatch"},
    {ErrorCode::kSourceMissing, "SourceMissing"},
    {ErrorCode::kDestinationExists, "DestinationExists"},
    {ErrorCode::kNotAMember, "NotAMember"},
    {ErrorCode::kScopeViolation, "ScopeViolation"},
    {ErrorCode::kAlgorithmNotFound, "AlgorithmNotFound"},
    {ErrorCode::kInputNotFound, "InputNotFound"},
    {ErrorCode::kExecutionFailed, "ExecutionFailed"},
    {ErrorCode::kUnknownUser, "UnknownUser"},
    {ErrorCode::kBadSecret, "BadSecret"},
    {ErrorCode::kInvalidToken, "InvalidToken"},
    {ErrorCode::kExpired, "Expired"},
    {ErrorCode::kMalformedFrame, "MalformedFrame"},
    {ErrorCode::kUnknownKind, "UnknownKind"},
    {ErrorCode::kUnauthenticated, "Unauthenticated"},
    {ErrorCode::kUnreachable, "Unreachable"},
    {ErrorCode::kTimeout, "Timeout"},
    {ErrorCode::kUnknownSite, "UnknownSite"},
}};

}  // namespace

std::string_view ErrorCodeName(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

std::optional<ErrorCode> ErrorCodeFromName(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return std::nullopt;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code),
      message_(message) {}

}  // namespace mgvo
