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

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mgvo {

// Every failure the grid reports carries one of these codes. The names
// (see ErrorCodeName) are what travel in ERROR frames on the wire.
enum class ErrorCode {
  kInvalidArgument,
  kInvariantViolation,
  kNotFound,
  kIoFailure,
  // dicom-subset
  kMissingMagic,
  kUnsupportedVr,
  kTruncated,
  kNonMonotonicTag,
  kPixelGeometryMismatch,
  kMissingPatientId,
  kNoPixelData,
  // query model
  kSyntaxError,
  kUnknownAttribute,
  kDuplicateAttribute,
  kDomainError,
  kRangeInverted,
  kXmlSyntaxError,
  kSchemaError,
  kDuplicateSite,
  // catalog
  kDuplicateSopUid,
  kSexMismatch,
  kDanglingSource,
  kVersionConflict,
  kCorruptLog,
  // storage element
  kAlreadyExists,
  kWrongSite,
  kInvalidLfn,
  kChecksumMismatch,
  kSourceMissing,
  kDestinationExists,
  // federation
  kNotAMember,
  kScopeViolation,
  // compute
  kAlgorithmNotFound,
  kInputNotFound,
  kExecutionFailed,
  // vo services
  kUnknownUser,
  kBadSecret,
  kInvalidToken,
  kExpired,
  kMalformedFrame,
  kUnknownKind,
  kUnauthenticated,
  kUnreachable,
  kTimeout,
  // harness
  kUnknownSite,
};

std::string_view ErrorCodeName(ErrorCode code);
std::optional<ErrorCode> ErrorCodeFromName(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  // The message without the code-name prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace mgvo
