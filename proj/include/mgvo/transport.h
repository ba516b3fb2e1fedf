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

#include <atomic>
#include <cstdint>
#include <string>
#include <string_view>

#include "mgvo/wire.h"

namespace mgvo {

// Server side of a node: one complete frame in, one complete frame out.
// Must be safe to call concurrently.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual std::string HandleFrame(std::string_view frame) = 0;
};

struct CallOutcome {
  enum class Status { kOk, kUnreachable, kTimeout };
  Status status = Status::kOk;
  std::string response;  // kOk only
  std::int64_t elapsed_ms = 0;
};

// Request/response delivery between nodes. Implemented over TCP
// (SocketTransport) and in-process queues with simulated time
// (InProcessNetwork); node code is written against this interface only.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual CallOutcome Call(std::string_view from, const std::string& address,
                           const std::string& frame,
                           std::int64_t timeout_ms) = 0;
};

// Typed request helper over a Transport. Transport failures become
// Error(Unreachable/Timeout); ERROR responses are rethrown with their code.
class RpcClient {
 public:
  RpcClient(Transport& transport, std::string self)
      : transport_(transport), self_(std::move(self)) {}

  Message Call(const std::string& address, std::string_view kind,
               const std::string& token, Json payload,
               std::int64_t timeout_ms = 30000);

  // As Call, but returns the raw response (ERROR included) and reports how
  // long delivery took.
  CallOutcome CallRaw(const std::string& address, const Message& request,
                      std::int64_t timeout_ms);

  std::uint64_t NextId() { return next_id_.fetch_add(1) + 1; }

 private:
  Transport& transport_;
  std::string self_;
  std::atomic<std::uint64_t> next_id_{0};
};

// Raises the Error carried by an ERROR message; no-op otherwise.
void ThrowIfError(const Message& response);

}  // namespace mgvo
