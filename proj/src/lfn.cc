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

#include "mgvo/lfn.h"

#include <algorithm>
#include <array>
#include <cctype>

#include "mgvo/error.h"

namespace mgvo {
namespace {

constexpr std::string_view kPrefix = "lfn:/mgvo/";
constexpr std::array<std::string_view, 4> kCategories{"images", "smf", "reports",
                                                      "algorithms"};

}  // namespace

std::string_view CategoryName(LfnCategory category) {
  return kCategories[static_cast<std::size_t>(category)];
}

bool IsValidSiteName(std::string_view site) {
  return !site.empty() && std::all_of(site.begin(), site.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-';
  });
}

bool IsValidLfnName(std::string_view name) {
  if (name.empty() || name == "." || name == "..") return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
           c == '_' || c == '-';
  });
}

std::optional<Lfn> Lfn::TryParse(std::string_view text) {
  if (text.substr(0, kPrefix.size()) != kPrefix) return std::nullopt;
  text.remove_prefix(kPrefix.size());
  std::size_t a = text.find('/');
  if (a == std::string_view::npos) return std::nullopt;
  std::size_t b = text.find('/', a + 1);
  if (b == std::string_view::npos) return std::nullopt;
  Lfn lfn;
  lfn.site = std::string(text.substr(0, a));
  std::string_view category = text.substr(a + 1, b - a - 1);
  lfn.name = std::string(text.substr(b + 1));
  auto it = std::find(kCategories.begin(), kCategories.end(), category);
  if (it == kCategories.end()) return std::nullopt;
  lfn.category = static_cast<LfnCategory>(it - kCategories.begin());
  if (!IsValidSiteName(lfn.site) || !IsValidLfnName(lfn.name)) {
    return std::nullopt;
  }
  return lfn;
}

Lfn Lfn::Parse(std::string_view text) {
  auto lfn = TryParse(text);
  if (!lfn) throw Error(ErrorCode::kInvalidLfn, std::string(text));
  return *lfn;
}

std::string Lfn::ToString() const {
  std::string out(kPrefix);
  out += site;
  out += '/';
  out += CategoryName(category);
  out += '/';
  out += name;
  return out;
}

}  // namespace mgvo
