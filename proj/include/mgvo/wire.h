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
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace mgvo {

using Json = nlohmann::json;

inline constexpr std::uint32_t kMaxFrameLength = 16u * 1024 * 1024;

// Message kinds. Requests, their responses (request kind + "_RESP", with
// QUERY_REMOTE_REQ answered by QUERY_REMOTE_RESP) and ERROR.
namespace kind {
inline constexpr std::string_view kAuth = "AUTH";
inline constexpr std::string_view kAdd = "ADD";
inline constexpr std::string_view kRetrieve = "RETRIEVE";
inline constexpr std::string_view kQuery = "QUERY";
inline constexpr std::string_view kQueryRemoteReq = "QUERY_REMOTE_REQ";
inline constexpr std::string_view kQueryRemoteResp = "QUERY_REMOTE_RESP";
inline constexpr std::string_view kAddAlg = "ADD_ALG";
inline constexpr std::string_view kExecAlg = "EXEC_ALG";
inline constexpr std::string_view kFilePutBegin = "FILE_PUT_BEGIN";
inline constexpr std::string_view kFileChunk = "FILE_CHUNK";
inline constexpr std::string_view kFilePutEnd = "FILE_PUT_END";
inline constexpr std::string_view kListSites = "LIST_SITES";
// Central-node kinds.
inline constexpr std::string_view kRegisterSite = "REGISTER_SITE";
inline constexpr std::string_view kValidateToken = "VALIDATE_TOKEN";
inline constexpr std::string_view kRevokeToken = "REVOKE_TOKEN";
inline constexpr std::string_view kError = "ERROR";
}  // namespace kind

// Request kinds served by site nodes.
const std::vector<std::string_view>& SiteRequestKinds();
// Request kinds served by the central node.
const std::vector<std::string_view>& CentralRequestKinds();
bool IsKnownKind(std::string_view k);
std::string ResponseKind(std::string_view request_kind);

struct Message {
  std::string kind;
  std::string token;
  std::uint64_t id = 0;
  Json payload = Json::object();

  bool operator==(const Message&) const = default;
};

// 4-byte big-endian length, then the JSON text
// {"kind":K,"token":T,"id":N,"payload":{...}} (compact, keys of `payload`
// sorted, a null payload sent as {}). Errors: MalformedFrame when the text
// exceeds kMaxFrameLength or is not valid UTF-8.
std::string EncodeFrame(const Message& m);

// Decodes exactly one frame. Errors: MalformedFrame (length field disagrees
// with the byte count, oversize, bad JSON or envelope).
Message DecodeFrame(std::string_view frame);

// Decodes the JSON text of a frame body.
Message DecodeBody(std::string_view body);

// Reassembles frames from a byte stream fed in arbitrary slices.
class FrameDecoder {
 public:
  void Feed(std::string_view bytes);
  // Next complete frame (header included), if any. Throws MalformedFrame
  // once an oversize length prefix is seen.
  std::optional<std::string> NextFrame();
  std::optional<Message> Next();
  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  std::string buffer_;
  std::size_t offset_ = 0;
};

Message MakeError(std::uint64_t id, std::string_view code,
                  std::string_view message);

std::string Base64Encode(std::string_view bytes);
// Errors: InvalidArgument.
std::string Base64Decode(std::string_view text);

}  // namespace mgvo
