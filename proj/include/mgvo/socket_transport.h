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
#include <memory>
#include <string>
#include <string_view>

#include "mgvo/transport.h"

namespace mgvo {

// "host:port" -> (host, port). Throws InvalidArgument.
std::pair<std::string, std::string> SplitHostPort(std::string_view address);

// One TCP connection per call. Refused connections and dropped streams come
// back as kUnreachable; no answer within the timeout as kTimeout.
class SocketTransport : public Transport {
 public:
  CallOutcome Call(std::string_view from, const std::string& address,
                   const std::string& frame, std::int64_t timeout_ms) override;
};

// Serves an Endpoint over TCP. Requests pipelined on one connection are
// handled concurrently; responses go out as they complete. A stream that
// cannot be framed gets an ERROR MalformedFrame and is then closed.
class SocketServer {
 public:
  // `listen` is host:port; port 0 picks a free port. Throws IoFailure if the
  // address cannot be bound.
  SocketServer(Endpoint& endpoint, const std::string& listen,
               int io_threads = 2, int workers = 8);
  ~SocketServer();

  SocketServer(const SocketServer&) = delete;
  SocketServer& operator=(const SocketServer&) = delete;

  // The bound address, with the actual port.
  const std::string& address() const;
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mgvo
