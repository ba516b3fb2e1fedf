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
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mgvo/date.h"
#include "mgvo/dicom.h"
#include "mgvo/lfn.h"
#include "mgvo/query.h"
#include "mgvo/result_set.h"

namespace mgvo {

enum class ImageKind { kOriginal, kSmf };

std::string_view ImageKindName(ImageKind kind);
std::optional<ImageKind> ImageKindFromName(std::string_view name);

struct PatientRow {
  std::string pseudonym;
  char sex = 'F';  // 'F' or 'M'
  int age_years = 0;

  bool operator==(const PatientRow&) const = default;
};

struct ImageRow {
  std::string sop_uid;
  std::string lfn;
  std::string pseudonym;
  char laterality = 'L';  // 'L' or 'R'
  Date study_date;
  ImageKind kind = ImageKind::kOriginal;
  std::optional<std::string> source_sop_uid;
  std::uint64_t size_bytes = 0;
  std::string checksum;

  bool operator==(const ImageRow&) const = default;
};

struct AlgorithmRow {
  std::string name;
  std::string version;
  std::string lfn;
  std::string checksum;
  bool builtin = false;

  bool operator==(const AlgorithmRow&) const = default;
};

// Catalog attributes of an anonymized image.
struct ImageMeta {
  std::string sop_uid;
  std::string pseudonym;
  char sex = 'F';
  int age_years = 0;
  char laterality = 'L';
  Date study_date;
};

// Reads the catalog attributes out of an anonymized file. Requires
// SOPInstanceUID, PatientID, PatientSex, PatientAge ("NNNY"),
// ImageLaterality and StudyDate; InvariantViolation otherwise.
ImageMeta ExtractImageMeta(const DicomFile& file);

struct ImageRegistration {
  ImageMeta meta;
  Lfn lfn;
  ImageKind kind = ImageKind::kOriginal;
  std::optional<std::string> source_sop_uid;
  std::uint64_t size_bytes = 0;
  std::string checksum;
};

enum class LfnEntryKind { kImage, kAlgorithm };

struct LfnEntry {
  std::optional<std::uint64_t> size_bytes;  // unknown for algorithms
  std::string checksum;
  LfnEntryKind kind = LfnEntryKind::kImage;
  std::optional<ImageKind> image_kind;
};

// The store-native form of a FormalQuery: typed bounds per attribute plus
// the access path. This is what the local handler hands to the store, in the
// way a relational site would hand it SQL.
struct NativePlan {
  Target target = Target::kPatients;
  std::optional<std::string> patient_key;  // point lookup by pseudonym
  std::optional<char> sex;
  std::optional<std::pair<int, int>> age;  // inclusive
  std::optional<char> laterality;
  std::optional<ImageKind> kind;
  std::optional<std::pair<Date, Date>> study_date;  // inclusive

  bool HasImageFilter() const { return laterality || kind || study_date; }
  bool MatchesPatient(const PatientRow& p) const;
  bool MatchesImage(const ImageRow& i) const;

  // SQL-like rendering for logs and tests.
  std::string Describe() const;
};

NativePlan TranslateQuery(const FormalQuery& q);

// Per-site metadata store. Mutations are serialized behind one writer lock
// and, when a log path is set, appended to the catalog log before they
// become visible; queries run under a shared lock and see a consistent
// snapshot.
//
// Log records, one per line:
//   P|pseudonym|sex|age
//   I|sop|lfn|pseudonym|lat|date|kind|source|size|checksum
//   A|name|version|lfn|checksum|builtin
class Catalog {
 public:
  explicit Catalog(std::string site);
  ~Catalog();

  Catalog(const Catalog&) = delete;
  Catalog& operator=(const Catalog&) = delete;

  // Replays `log_path` (if present) and appends subsequent mutations to it.
  // Errors: CorruptLog, IoFailure.
  static std::unique_ptr<Catalog> Open(std::string site,
                                       const std::filesystem::path& log_path,
                                       bool sync_writes = false);

  const std::string& site() const { return site_; }

  // Errors: DuplicateSopUid, SexMismatch, DanglingSource, InvalidArgument.
  ImageRow RegisterImage(const ImageRegistration& reg);
  // Same checks as RegisterImage without mutating anything.
  void CheckImage(const ImageRegistration& reg) const;

  // Idempotent for an identical checksum; VersionConflict otherwise.
  AlgorithmRow RegisterAlgorithm(const AlgorithmRow& row);

  std::vector<Row> LocalQuery(const FormalQuery& q) const;
  std::vector<Row> Execute(const NativePlan& plan) const;

  // Errors: NotFound.
  LfnEntry LookupLfn(std::string_view lfn) const;

  std::optional<PatientRow> FindPatient(std::string_view pseudonym) const;
  std::optional<ImageRow> FindImage(std::string_view sop_uid) const;
  std::optional<ImageRow> FindImageByLfn(std::string_view lfn) const;
  std::optional<AlgorithmRow> FindAlgorithm(std::string_view name,
                                            std::string_view version) const;

  std::size_t patient_count() const;
  std::size_t image_count() const;
  std::size_t algorithm_count() const;
  std::vector<PatientRow> Patients() const;
  std::vector<ImageRow> Images() const;
  std::vector<AlgorithmRow> Algorithms() const;

 private:
  void CheckImageLocked(const ImageRegistration& reg) const;
  void ApplyPatient(PatientRow row);
  void ApplyImage(ImageRow row);
  void Append(const std::string& line);
  void ReplayLine(std::string_view line, std::size_t line_no);
  Row PatientToRow(const PatientRow& p) const;
  Row ImageToRow(const ImageRow& i) const;

  std::string site_;
  mutable std::shared_mutex mu_;
  std::map<std::string, PatientRow> patients_;
  std::map<std::string, ImageRow> images_;
  std::map<std::string, std::set<std::string>> images_by_patient_;
  std::map<std::string, std::string> image_by_lfn_;
  std::map<std::pair<std::string, std::string>, AlgorithmRow> algorithms_;
  std::map<std::string, std::pair<std::string, std::string>> algorithm_by_lfn_;
  std::FILE* log_ = nullptr;
  bool sync_writes_ = false;
};

}  // namespace mgvo
