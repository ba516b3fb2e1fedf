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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mgvo/transport.h"

namespace mgvo {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitProtocol = 2;
inline constexpr int kExitPartial = 3;

// Files up to this size travel inline in ADD / ADD_ALG; larger ones use the
// FILE_PUT_BEGIN / FILE_CHUNK / FILE_PUT_END sequence.
inline constexpr std::size_t kInlineUploadLimit = 8u * 1024 * 1024;

struct CachedSession {
  std::string user;
  std::string token;
  std::int64_t expires_at_ms = 0;
};

// Single line `user token expires_at`, written with owner-only permissions.
void WriteTokenCache(const std::filesystem::path& path, const CachedSession& s);
// Errors: NotFound (no cache), InvalidArgument (unreadable line).
CachedSession ReadTokenCache(const std::filesystem::path& path);

std::filesystem::path DefaultTokenCachePath();

// Runs one command line (args[0] is the program name) and returns the exit
// code. Client subcommands talk through `transport`; `serve` always binds
// real sockets.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err, Transport& transport);

}  // namespace mgvo
