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

// Calendar date in the DICOM DA form "YYYYMMDD".
struct Date {
  int year = 0;
  int month = 0;
  int day = 0;

  static std::optional<Date> Parse(std::string_view yyyymmdd);
  std::string ToString() const;
  bool IsValid() const;

  auto operator<=>(const Date&) const = default;
};

// Age in completed years on `on` for someone born on `birth`; the birthday
// itself counts as completed. Negative when birth is after `on`.
int CompletedYears(const Date& birth, const Date& on);

}  // namespace mgvo
