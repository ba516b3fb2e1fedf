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

#include "mgvo/dicom.h"

#include <algorithm>
#include <array>
#include <cstdio>
#include <utility>

#include "mgvo/error.h"
#include "mgvo/fnv.h"

namespace mgvo {
namespace {

constexpr std::array<std::pair<Vr, std::string_view>, 8> kVrCodes{{
    {Vr::kPN, "PN"},
    {Vr::kLO, "LO"},
    {Vr::kCS, "CS"},
    {Vr::kDA, "DA"},
    {Vr::kAS, "AS"},
    {Vr::kUI, "UI"},
    {Vr::kUS, "US"},
    {Vr::kOW, "OW"},
}};

constexpr std::array<std::pair<DicomTag, Vr>, 12> kSubset{{
    {tags::kSopInstanceUid, Vr::kUI},
    {tags::kStudyDate, Vr::kDA},
    {tags::kPatientName, Vr::kPN},
    {tags::kPatientId, Vr::kLO},
    {tags::kPatientBirthDate, Vr::kDA},
    {tags::kPatientSex, Vr::kCS},
    {tags::kPatientAge, Vr::kAS},
    {tags::kImageLaterality, Vr::kCS},
    {tags::kRows, Vr::kUS},
    {tags::kColumns, Vr::kUS},
    {tags::kBitsAllocated, Vr::kUS},
    {tags::kPixelData, Vr::kOW},
}};

constexpr std::uint32_t kMaxLongLength = 0xFFFFFFFEu;

char PadByte(Vr vr) {
  switch (vr) {
    case Vr::kUI:
    case Vr::kOW:
    case Vr::kUS:
      return '\0';
    default:
      return ' ';
  }
}

std::uint16_t ReadU16(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t ReadU32(std::string_view b, std::size_t at) {
  return static_cast<std::uint32_t>(ReadU16(b, at)) |
         (static_cast<std::uint32_t>(ReadU16(b, at + 2)) << 16);
}

void AppendU16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void AppendU32(std::string& out, std::uint32_t v) {
  AppendU16(out, static_cast<std::uint16_t>(v & 0xffff));
  AppendU16(out, static_cast<std::uint16_t>(v >> 16));
}

std::string OffsetText(std::size_t offset) {
  return "at offset " + std::to_string(offset);
}

// Invariants that hold per element regardless of its neighbours.
void CheckElement(const DicomElement& e) {
  if (e.value.size() % 2 != 0) {
    throw Error(ErrorCode::kInvariantViolation,
                "odd value length for " + e.tag.ToString());
  }
  if (e.vr == Vr::kOW ? e.value.size() > kMaxLongLength
                      : e.value.size() > 0xFFFF) {
    throw Error(ErrorCode::kInvariantViolation,
                "value too long for " + e.tag.ToString());
  }
  if (auto expected = ExpectedVr(e.tag); expected && *expected != e.vr) {
    throw Error(ErrorCode::kInvariantViolation,
                e.tag.ToString() + " requires VR " +
                    std::string(VrCode(*expected)));
  }
  if (e.vr == Vr::kUS && e.value.size() != 2) {
    throw Error(ErrorCode::kInvariantViolation,
                "US value of " + e.tag.ToString() + " must be 2 bytes");
  }
}

}  // namespace

std::string DicomTag::ToString() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "(%04X,%04X)", group, element);
  return buf;
}

std::string_view VrCode(Vr vr) {
  for (const auto& [v, code] : kVrCodes) {
    if (v == vr) return code;
  }
  return "??";
}

std::optional<Vr> VrFromCode(std::string_view code) {
  for (const auto& [v, c] : kVrCodes) {
    if (c == code) return v;
  }
  return std::nullopt;
}

std::optional<Vr> ExpectedVr(DicomTag tag) {
  for (const auto& [t, vr] : kSubset) {
    if (t == tag) return vr;
  }
  return std::nullopt;
}

std::string PadValue(Vr vr, std::string_view value) {
  std::string out(value);
  if (out.size() % 2 != 0) out.push_back(PadByte(vr));
  return out;
}

const DicomElement* DicomFile::Find(DicomTag tag) const {
  auto it = std::lower_bound(
      elements_.begin(), elements_.end(), tag,
      [](const DicomElement& e, DicomTag t) { return e.tag < t; });
  if (it != elements_.end() && it->tag == tag) return &*it;
  // Unsorted element lists (not yet validated) fall back to a scan.
  for (const auto& e : elements_) {
    if (e.tag == tag) return &e;
  }
  return nullptr;
}

std::optional<std::string> DicomFile::GetText(DicomTag tag) const {
  const DicomElement* e = Find(tag);
  if (e == nullptr) return std::nullopt;
  std::string text = e->value;
  while (!text.empty() && (text.back() == ' ' || text.back() == '\0')) {
    text.pop_back();
  }
  return text;
}

std::optional<std::uint16_t> DicomFile::GetUs(DicomTag tag) const {
  const DicomElement* e = Find(tag);
  if (e == nullptr || e->vr != Vr::kUS || e->value.size() != 2) {
    return std::nullopt;
  }
  return ReadU16(e->value, 0);
}

void DicomFile::Set(DicomElement element) {
  auto it = std::lower_bound(
      elements_.begin(), elements_.end(), element.tag,
      [](const DicomElement& e, DicomTag t) { return e.tag < t; });
  if (it != elements_.end() && it->tag == element.tag) {
    *it = std::move(element);
  } else {
    elements_.insert(it, std::move(element));
  }
}

void DicomFile::SetText(DicomTag tag, Vr vr, std::string_view text) {
  Set(DicomElement{tag, vr, PadValue(vr, text)});
}

void DicomFile::SetUs(DicomTag tag, std::uint16_t value) {
  std::string bytes;
  AppendU16(bytes, value);
  Set(DicomElement{tag, Vr::kUS, std::move(bytes)});
}

bool DicomFile::Remove(DicomTag tag) {
  auto it = std::find_if(elements_.begin(), elements_.end(),
                         [&](const DicomElement& e) { return e.tag == tag; });
  if (it == elements_.end()) return false;
  elements_.erase(it);
  return true;
}

std::vector<std::uint16_t> DicomFile::PixelSamples() const {
  std::vector<std::uint16_t> samples;
  const DicomElement* e = Find(tags::kPixelData);
  if (e == nullptr) return samples;
  samples.reserve(e->value.size() / 2);
  for (std::size_t i = 0; i + 1 < e->value.size(); i += 2) {
    samples.push_back(ReadU16(e->value, i));
  }
  return samples;
}

void DicomFile::SetPixels(std::uint16_t rows, std::uint16_t columns,
                          std::span<const std::uint16_t> samples) {
  std::string bytes;
  bytes.reserve(samples.size() * 2);
  for (std::uint16_t s : samples) AppendU16(bytes, s);
  SetUs(tags::kRows, rows);
  SetUs(tags::kColumns, columns);
  SetUs(tags::kBitsAllocated, 16);
  Set(DicomElement{tags::kPixelData, Vr::kOW, std::move(bytes)});
}

void DicomFile::Validate() const {
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    if (i > 0 && !(elements_[i - 1].tag < elements_[i].tag)) {
      throw Error(ErrorCode::kNonMonotonicTag, elements_[i].tag.ToString());
    }
    CheckElement(elements_[i]);
  }
  if (!Has(tags::kSopInstanceUid)) {
    throw Error(ErrorCode::kInvariantViolation, "SOPInstanceUID missing");
  }
  const DicomElement* pixels = Find(tags::kPixelData);
  if (pixels == nullptr) return;
  auto rows = GetUs(tags::kRows);
  auto cols = GetUs(tags::kColumns);
  auto bits = GetUs(tags::kBitsAllocated);
  if (!rows || !cols || !bits) {
    throw Error(ErrorCode::kPixelGeometryMismatch,
                "PixelData without Rows/Columns/BitsAllocated");
  }
  if (*bits != 16) {
    throw Error(ErrorCode::kPixelGeometryMismatch,
                "BitsAllocated must be 16, got " + std::to_string(*bits));
  }
  std::uint64_t expected = std::uint64_t{*rows} * *cols * 2;
  if (pixels->value.size() != expected) {
    throw Error(ErrorCode::kPixelGeometryMismatch,
                "PixelData has " + std::to_string(pixels->value.size()) +
                    " bytes, geometry requires " + std::to_string(expected));
  }
}

DicomFile ParseDicom(std::string_view bytes) {
  if (bytes.size() < kHeaderSize ||
      bytes.substr(kPreambleSize, 4) != "DICM") {
    throw Error(ErrorCode::kMissingMagic, "no DICM at offset 128");
  }
  std::vector<DicomElement> elements;
  std::size_t pos = kHeaderSize;
  while (pos < bytes.size()) {
    const std::size_t start = pos;
    if (bytes.size() - pos < 8) {
      throw Error(ErrorCode::kTruncated, "element header " + OffsetText(pos));
    }
    DicomTag tag{ReadU16(bytes, pos), ReadU16(bytes, pos + 2)};
    std::string_view code = bytes.substr(pos + 4, 2);
    auto vr = VrFromCode(code);
    if (!vr) {
      throw Error(ErrorCode::kUnsupportedVr,
                  std::string(code) + " " + OffsetText(pos + 4));
    }
    std::uint32_t length = 0;
    if (*vr == Vr::kOW) {
      if (bytes.size() - pos < 12) {
        throw Error(ErrorCode::kTruncated, "OW header " + OffsetText(pos));
      }
      length = ReadU32(bytes, pos + 8);
      pos += 12;
      if (length > kMaxLongLength) {
        throw Error(ErrorCode::kInvariantViolation,
                    "undefined length " + OffsetText(start));
      }
    } else {
      length = ReadU16(bytes, pos + 6);
      pos += 8;
    }
    if (bytes.size() - pos < length) {
      throw Error(ErrorCode::kTruncated,
                  "value of " + tag.ToString() + " " + OffsetText(pos));
    }
    if (!elements.empty() && !(elements.back().tag < tag)) {
      throw Error(ErrorCode::kNonMonotonicTag,
                  tag.ToString() + " " + OffsetText(start));
    }
    elements.push_back(
        DicomElement{tag, *vr, std::string(bytes.substr(pos, length))});
    pos += length;
  }
  DicomFile file(std::move(elements));
  file.Validate();
  return file;
}

std::string WriteDicom(const DicomFile& file) {
  try {
    file.Validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kInvariantViolation, e.what());
  }
  std::size_t total = kHeaderSize;
  for (const auto& e : file.elements()) {
    total += (e.vr == Vr::kOW ? 12 : 8) + e.value.size();
  }
  std::string out;
  out.reserve(total);
  out.append(kPreambleSize, '\0');
  out.append("DICM");
  for (const auto& e : file.elements()) {
    AppendU16(out, e.tag.group);
    AppendU16(out, e.tag.element);
    out.append(VrCode(e.vr));
    if (e.vr == Vr::kOW) {
      AppendU16(out, 0);
      AppendU32(out, static_cast<std::uint32_t>(e.value.size()));
    } else {
      AppendU16(out, static_cast<std::uint16_t>(e.value.size()));
    }
    out.append(e.value);
  }
  return out;
}

std::string Pseudonym(std::string_view site_salt, std::string_view patient_id) {
  Fnv1a64Hasher h;
  h.Update(site_salt);
  h.Update(":");
  h.Update(patient_id);
  return Hex64(h.digest());
}

Anonymized Anonymize(const DicomFile& file, std::string_view site_salt,
                     const Date& study_date) {
  auto patient_id = file.GetText(tags::kPatientId);
  if (!patient_id) {
    throw Error(ErrorCode::kMissingPatientId, "PatientID (0010,0020) absent");
  }
  Anonymized out{file, AnonRecord{}};
  out.record.site_salt = std::string(site_salt);

  const bool already_anonymous = file.GetText(tags::kPatientName) == "ANON" &&
                                 !file.Has(tags::kPatientBirthDate) &&
                                 IsHex16(*patient_id);
  if (already_anonymous) {
    out.record.pseudonym = *patient_id;
  } else {
    out.record.original_patient_id = *patient_id;
    out.record.pseudonym = Pseudonym(site_salt, *patient_id);
  }

  out.file.SetText(tags::kPatientName, Vr::kPN, "ANON");
  out.file.SetText(tags::kPatientId, Vr::kLO, out.record.pseudonym);
  if (auto birth_text = file.GetText(tags::kPatientBirthDate)) {
    auto birth = Date::Parse(*birth_text);
    if (!birth) {
      throw Error(ErrorCode::kInvariantViolation,
                  "bad PatientBirthDate '" + *birth_text + "'");
    }
    int age = CompletedYears(*birth, study_date);
    if (age < 0 || age > 999) {
      throw Error(ErrorCode::kInvariantViolation,
                  "age out of range at study date " + study_date.ToString());
    }
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%03dY", age);
    out.file.SetText(tags::kPatientAge, Vr::kAS, buf);
    out.file.Remove(tags::kPatientBirthDate);
  }
  return out;
}

}  // namespace mgvo
