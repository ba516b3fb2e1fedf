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

#include "mgvo/wire.h"

#include <openssl/evp.h>

#include <algorithm>

#include "mgvo/error.h"

namespace mgvo {
namespace {

[[noreturn]] void Malformed(const std::string& why) {
  throw Error(ErrorCode::kMalformedFrame, why);
}

std::uint32_t ReadLength(std::string_view b) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[0])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[3]));
}

}  // namespace

const std::vector<std::string_view>& SiteRequestKinds() {
  static const std::vector<std::string_view> kinds{
      kind::kAuth,         kind::kAdd,          kind::kRetrieve,
      kind::kQuery,        kind::kQueryRemoteReq, kind::kAddAlg,
      kind::kExecAlg,      kind::kFilePutBegin, kind::kFileChunk,
      kind::kFilePutEnd,   kind::kListSites};
  return kinds;
}

const std::vector<std::string_view>& CentralRequestKinds() {
  static const std::vector<std::string_view> kinds{
      kind::kAuth, kind::kRegisterSite, kind::kValidateToken,
      kind::kRevokeToken, kind::kListSites};
  return kinds;
}

std::string ResponseKind(std::string_view request_kind) {
  if (request_kind == kind::kQueryRemoteReq) {
    return std::string(kind::kQueryRemoteResp);
  }
  return std::string(request_kind) + "_RESP";
}

bool IsKnownKind(std::string_view k) {
  if (k == kind::kError || k == kind::kQueryRemoteResp) return true;
  for (const auto* list : {&SiteRequestKinds(), &CentralRequestKinds()}) {
    for (std::string_view req : *list) {
      if (k == req || k == ResponseKind(req)) return true;
    }
  }
  return false;
}

std::string EncodeFrame(const Message& m) {
  std::string body;
  try {
    body = "{\"kind\":" + Json(m.kind).dump() + ",\"token\":" +
           Json(m.token).dump() + ",\"id\":" + std::to_string(m.id) +
           ",\"payload\":" + (m.payload.is_null() ? std::string("{}") : m.payload.dump()) +
           "}";
  } catch (const Json::exception& e) {
    Malformed(std::string("cannot encode: ") + e.what());
  }
  if (body.size() > kMaxFrameLength) {
    Malformed("frame of " + std::to_string(body.size()) + " bytes exceeds cap");
  }
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string frame;
  frame.reserve(4 + body.size());
  frame.push_back(static_cast<char>(n >> 24));
  frame.push_back(static_cast<char>((n >> 16) & 0xff));
  frame.push_back(static_cast<char>((n >> 8) & 0xff));
  frame.push_back(static_cast<char>(n & 0xff));
  frame += body;
  return frame;
}

Message DecodeBody(std::string_view body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::exception& e) {
    Malformed(std::string("bad JSON: ") + e.what());
  }
  if (!j.is_object() || j.size() != 4 || !j.contains("kind") ||
      !j.contains("token") || !j.contains("id") || !j.contains("payload")) {
    Malformed("envelope must be {kind, token, id, payload}");
  }
  if (!j["kind"].is_string() || !j["token"].is_string() ||
      !j["id"].is_number_unsigned() || !j["payload"].is_object()) {
    Malformed("envelope field has the wrong type");
  }
  Message m;
  m.kind = j["kind"].get<std::string>();
  m.token = j["token"].get<std::string>();
  m.id = j["id"].get<std::uint64_t>();
  m.payload = std::move(j["payload"]);
  return m;
}

Message DecodeFrame(std::string_view frame) {
  if (frame.size() < 4) Malformed("frame shorter than its length prefix");
  std::uint32_t n = ReadLength(frame);
  if (n > kMaxFrameLength) Malformed("length " + std::to_string(n) + " exceeds cap");
  if (frame.size() - 4 != n) {
    Malformed("length field says " + std::to_string(n) + " bytes, frame has " +
              std::to_string(frame.size() - 4));
  }
  return DecodeBody(frame.substr(4));
}

void FrameDecoder::Feed(std::string_view bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.append(bytes);
}

std::optional<std::string> FrameDecoder::NextFrame() {
  if (buffered() < 4) return std::nullopt;
  std::uint32_t n = ReadLength(std::string_view(buffer_).substr(offset_));
  if (n > kMaxFrameLength) Malformed("length " + std::to_string(n) + " exceeds cap");
  if (buffered() - 4 < n) return std::nullopt;
  std::string frame = buffer_.substr(offset_, 4 + std::size_t{n});
  offset_ += 4 + std::size_t{n};
  if (offset_ > (1u << 20) && offset_ * 2 > buffer_.size()) {
    buffer_.erase(0, offset_);
    offset_ = 0;
  }
  return frame;
}

std::optional<Message> FrameDecoder::Next() {
  auto frame = NextFrame();
  if (!frame) return std::nullopt;
  return DecodeFrame(*frame);
}

Message MakeError(std::uint64_t id, std::string_view code,
                  std::string_view message) {
  Message m;
  m.kind = std::string(kind::kError);
  m.id = id;
  m.payload = Json{{"code", code}, {"message", message}};
  return m;
}

std::string Base64Encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  if (bytes.empty()) return out;
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(bytes.data()),
                          static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string Base64Decode(std::string_view text) {
  if (text.size() % 4 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "base64 length not a multiple of 4");
  }
  std::string out(3 * (text.size() / 4), '\0');
  if (text.empty()) return out;
  int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(text.data()),
                          static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::kInvalidArgument, "invalid base64");
  // EVP_DecodeBlock counts padding as zero bytes.
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

}  // namespace mgvo
