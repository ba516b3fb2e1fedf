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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgvo/date.h"

namespace mgvo {

struct DicomTag {
  std::uint16_t group = 0;
  std::uint16_t element = 0;

  // "(GGGG,EEEE)", uppercase hex.
  std::string ToString() const;

  auto operator<=>(const DicomTag&) const = default;
};

namespace tags {
inline constexpr DicomTag kSopInstanceUid{0x0008, 0x0018};
inline constexpr DicomTag kStudyDate{0x0008, 0x0020};
inline constexpr DicomTag kPatientName{0x0010, 0x0010};
inline constexpr DicomTag kPatientId{0x0010, 0x0020};
inline constexpr DicomTag kPatientBirthDate{0x0010, 0x0030};
inline constexpr DicomTag kPatientSex{0x0010, 0x0040};
inline constexpr DicomTag kPatientAge{0x0010, 0x1010};
inline constexpr DicomTag kImageLaterality{0x0020, 0x0062};
inline constexpr DicomTag kRows{0x0028, 0x0010};
inline constexpr DicomTag kColumns{0x0028, 0x0011};
inline constexpr DicomTag kBitsAllocated{0x0028, 0x0100};
inline constexpr DicomTag kPixelData{0x7FE0, 0x0010};
}  // namespace tags

enum class Vr { kPN, kLO, kCS, kDA, kAS, kUI, kUS, kOW };

std::string_view VrCode(Vr vr);
std::optional<Vr> VrFromCode(std::string_view code);

// The VR a tag of the supported subset must carry; nullopt for tags outside
// the subset (those are preserved verbatim with whatever supported VR they
// were written with).
std::optional<Vr> ExpectedVr(DicomTag tag);

struct DicomElement {
  DicomTag tag;
  Vr vr = Vr::kLO;
  std::string value;  // raw bytes including padding

  bool operator==(const DicomElement&) const = default;
};

// Pads a value to even length with the VR's padding byte.
std::string PadValue(Vr vr, std::string_view value);

// An explicit-VR little-endian DICOM object restricted to the supported VR
// set. Elements are kept in ascending tag order by the mutators; a file
// built from an arbitrary element list is checked by Validate().
class DicomFile {
 public:
  DicomFile() = default;
  explicit DicomFile(std::vector<DicomElement> elements)
      : elements_(std::move(elements)) {}

  const std::vector<DicomElement>& elements() const { return elements_; }

  const DicomElement* Find(DicomTag tag) const;
  bool Has(DicomTag tag) const { return Find(tag) != nullptr; }

  // Text value with trailing padding (spaces, NULs) stripped.
  std::optional<std::string> GetText(DicomTag tag) const;
  std::optional<std::uint16_t> GetUs(DicomTag tag) const;

  // Inserts or replaces, keeping tag order. Text is padded per VR.
  void SetText(DicomTag tag, Vr vr, std::string_view text);
  void SetUs(DicomTag tag, std::uint16_t value);
  void Set(DicomElement element);
  bool Remove(DicomTag tag);

  // 16-bit little-endian samples of PixelData; empty if absent.
  std::vector<std::uint16_t> PixelSamples() const;
  // Sets Rows, Columns, BitsAllocated=16 and PixelData together.
  void SetPixels(std::uint16_t rows, std::uint16_t columns,
                 std::span<const std::uint16_t> samples);

  // Throws Error (InvariantViolation, NonMonotonicTag, PixelGeometryMismatch)
  // on the first violated invariant.
  void Validate() const;

  bool operator==(const DicomFile&) const = default;

 private:
  std::vector<DicomElement> elements_;
};

inline constexpr std::size_t kPreambleSize = 128;
inline constexpr std::size_t kHeaderSize = kPreambleSize + 4;

// Errors: MissingMagic, UnsupportedVR, Truncated, NonMonotonicTag,
// PixelGeometryMismatch, InvariantViolation.
DicomFile ParseDicom(std::string_view bytes);

// Canonical encoding; byte-identical for equal inputs. Any invariant
// violation is reported as InvariantViolation.
std::string WriteDicom(const DicomFile& file);

struct AnonRecord {
  // Empty when the input was already anonymized.
  std::string original_patient_id;
  std::string pseudonym;
  std::string site_salt;
};

// hex64(fnv1a64(salt ":" patient_id)).
std::string Pseudonym(std::string_view site_salt, std::string_view patient_id);

struct Anonymized {
  DicomFile file;
  AnonRecord record;
};

// Replaces PatientName with "ANON", PatientID with its site pseudonym,
// drops PatientBirthDate and records PatientAge ("NNNY") at study_date.
// A file that is already anonymized (name ANON, 16-hex id, no birth date)
// keeps its pseudonym, which makes the operation idempotent.
Anonymized Anonymize(const DicomFile& file, std::string_view site_salt,
                     const Date& study_date);

}  // namespace mgvo
