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

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace mgvo {

enum class LfnCategory { kImages, kSmf, kReports, kAlgorithms };

std::string_view CategoryName(LfnCategory category);

// Site component reserved for compiled-in algorithms.
inline constexpr std::string_view kBuiltinSite = "_builtin";

// Logical file name: lfn:/mgvo/<site>/<category>/<name>.
struct Lfn {
  std::string site;
  LfnCategory category = LfnCategory::kImages;
  std::string name;

  // Throws InvalidLfn.
  static Lfn Parse(std::string_view text);
  static std::optional<Lfn> TryParse(std::string_view text);

  std::string ToString() const;

  auto operator<=>(const Lfn&) const = default;
};

// Lowercase [a-z0-9_-]+; the same rule applies to VO member names.
bool IsValidSiteName(std::string_view site);
// [A-Za-z0-9._-]+, excluding "." and "..".
bool IsValidLfnName(std::string_view name);

}  // namespace mgvo
