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

#include "mgvo/transport.h"

#include "mgvo/error.h"

namespace mgvo {

void ThrowIfError(const Message& response) {
  if (response.kind != kind::kError) return;
  std::string code = response.payload.value("code", "");
  std::string message = response.payload.value("message", "");
  throw Error(ErrorCodeFromName(code).value_or(ErrorCode::kInvalidArgument),
              message);
}

CallOutcome RpcClient::CallRaw(const std::string& address,
                               const Message& request,
                               std::int64_t timeout_ms) {
  return transport_.Call(self_, address, EncodeFrame(request), timeout_ms);
}

Message RpcClient::Call(const std::string& address, std::string_view kind,
                        const std::string& token, Json payload,
                        std::int64_t timeout_ms) {
  Message request{std::string(kind), token, NextId(), std::move(payload)};
  CallOutcome outcome = CallRaw(address, request, timeout_ms);
  switch (outcome.status) {
    case CallOutcome::Status::kUnreachable:
      throw Error(ErrorCode::kUnreachable, address);
    case CallOutcome::Status::kTimeout:
      throw Error(ErrorCode::kTimeout, address);
    case CallOutcome::Status::kOk:
      break;
  }
  Message response = DecodeFrame(outcome.response);
  ThrowIfError(response);
  if (response.id != request.id) {
    throw Error(ErrorCode::kMalformedFrame,
                "response id " + std::to_string(response.id) +
                    " does not match request " + std::to_string(request.id));
  }
  return response;
}

}  // namespace mgvo
