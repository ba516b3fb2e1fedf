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

#include <cstdio>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mgvo/dicom.h"
#include "test_util.h"

namespace mgvo::testing {

// Random valid files: the supported tags with their VRs plus unknown tags
// carrying any supported VR.
inline DicomFile RandomDicomFile(std::mt19937_64& rng) {
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  auto text = [&](const std::string& alphabet, std::size_t max_len) {
    std::string s(pick(max_len + 1), ' ');
    for (auto& c : s) c = alphabet[pick(alphabet.size())];
    return s;
  };
  auto value_for = [&](Vr vr) -> std::string {
    switch (vr) {
      case Vr::kPN:
        return text("ABCDEFGHIJKLMNOPQRSTUVWXYZ^", 24);
      case Vr::kLO:
        return text("abcdefghijklmnopqrstuvwxyz0123456789-. ", 30);
      case Vr::kCS:
        return text("ABCDEFGHIJKLMNOPQRSTUVWXYZ_", 8);
      case Vr::kDA: {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d%02d%02d", 1900 + static_cast<int>(pick(120)),
                      1 + static_cast<int>(pick(12)), 1 + static_cast<int>(pick(28)));
        return buf;
      }
      case Vr::kAS: {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "%03dY", static_cast<int>(pick(1000)));
        return buf;
      }
      case Vr::kUI:
        return "1." + text("0123456789.", 40) + "9";
      case Vr::kUS:
      case Vr::kOW:
        break;
    }
    return "";
  };

  DicomFile f;
  f.SetText(tags::kSopInstanceUid, Vr::kUI, value_for(Vr::kUI));
  const std::vector<std::pair<DicomTag, Vr>> text_tags = {
      {tags::kStudyDate, Vr::kDA},         {tags::kPatientName, Vr::kPN},
      {tags::kPatientId, Vr::kLO},         {tags::kPatientBirthDate, Vr::kDA},
      {tags::kPatientSex, Vr::kCS},        {tags::kPatientAge, Vr::kAS},
      {tags::kImageLaterality, Vr::kCS}};
  for (const auto& [tag, vr] : text_tags) {
    if (pick(3) != 0) f.SetText(tag, vr, value_for(vr));
  }
  const std::vector<Vr> all = {Vr::kPN, Vr::kLO, Vr::kCS, Vr::kDA,
                               Vr::kAS, Vr::kUI, Vr::kUS, Vr::kOW};
  const std::size_t unknown = pick(5);
  for (std::size_t i = 0; i < unknown; ++i) {
    // Odd groups are private and never collide with the supported subset.
    DicomTag tag{static_cast<std::uint16_t>(0x0009 + 2 * pick(8)),
                 static_cast<std::uint16_t>(pick(0x10000))};
    Vr vr = all[pick(all.size())];
    if (vr == Vr::kUS) {
      f.SetUs(tag, static_cast<std::uint16_t>(rng()));
    } else if (vr == Vr::kOW) {
      f.Set(DicomElement{tag, vr, RandomBytes(rng, 2 * pick(40))});
    } else {
      f.SetText(tag, vr, value_for(vr));
    }
  }
  if (pick(2) == 0) {
    auto rows = static_cast<std::uint16_t>(1 + pick(8));
    auto cols = static_cast<std::uint16_t>(1 + pick(8));
    std::vector<std::uint16_t> samples(std::size_t{rows} * cols);
    for (auto& s : samples) s = static_cast<std::uint16_t>(rng());
    f.SetPixels(rows, cols, samples);
  }
  return f;
}

}  // namespace mgvo::testing
