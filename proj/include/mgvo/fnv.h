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
#include <string>
#include <string_view>

namespace mgvo {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

// FNV-1a, 64-bit. Non-cryptographic: used for checksums, pseudonyms and
// derived identifiers, never for secrecy.
class Fnv1a64Hasher {
 public:
  void Update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= kFnvPrime;
    }
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = kFnvOffsetBasis;
};

inline std::uint64_t Fnv1a64(std::string_view bytes) {
  Fnv1a64Hasher h;
  h.Update(bytes);
  return h.digest();
}

// 16-char lowercase hex, zero padded.
std::string Hex64(std::uint64_t value);

// Checksum of a payload as stored in catalogs and .meta sidecars.
inline std::string Checksum(std::string_view bytes) {
  return Hex64(Fnv1a64(bytes));
}

bool IsHex16(std::string_view text);

}  // namespace mgvo
