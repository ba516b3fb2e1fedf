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

#include "mgvo/catalog.h"

#include <unistd.h>

#include <fstream>
#include <mutex>

#include "mgvo/error.h"
#include "mgvo/fnv.h"

namespace mgvo {
namespace {

std::vector<std::string_view> SplitBars(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t bar = line.find('|', start);
    if (bar == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, bar - start));
    start = bar + 1;
  }
}

bool IsLogSafe(std::string_view v) {
  return v.find_first_of("|\n\r") == std::string_view::npos;
}

void RequireField(std::string_view what, std::string_view v) {
  if (v.empty() || !IsLogSafe(v)) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(what) + " '" + std::string(v) + "' is not storable");
  }
}

void RequireHex16(std::string_view what, std::string_view v) {
  if (!IsHex16(v)) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(what) + " must be 16 lowercase hex, got '" +
                    std::string(v) + "'");
  }
}

std::optional<int> ParseInt(std::string_view s) {
  if (s.empty() || s.size() > 9 ||
      s.find_first_not_of("0123456789") != std::string_view::npos) {
    return std::nullopt;
  }
  return std::stoi(std::string(s));
}

}  // namespace

std::string_view ImageKindName(ImageKind kind) {
  return kind == ImageKind::kOriginal ? "ORIGINAL" : "SMF";
}

std::optional<ImageKind> ImageKindFromName(std::string_view name) {
  if (name == "ORIGINAL") return ImageKind::kOriginal;
  if (name == "SMF") return ImageKind::kSmf;
  return std::nullopt;
}

ImageMeta ExtractImageMeta(const DicomFile& file) {
  auto need = [&](DicomTag tag, std::string_view what) {
    auto v = file.GetText(tag);
    if (!v || v->empty()) {
      throw Error(ErrorCode::kInvariantViolation,
                  std::string(what) + " " + tag.ToString() + " missing");
    }
    return *v;
  };
  ImageMeta meta;
  meta.sop_uid = need(tags::kSopInstanceUid, "SOPInstanceUID");
  meta.pseudonym = need(tags::kPatientId, "PatientID");
  std::string sex = need(tags::kPatientSex, "PatientSex");
  if (sex != "F" && sex != "M") {
    throw Error(ErrorCode::kInvariantViolation, "PatientSex '" + sex + "'");
  }
  meta.sex = sex[0];
  std::string age = need(tags::kPatientAge, "PatientAge");
  auto years = age.size() == 4 && age[3] == 'Y' ? ParseInt(age.substr(0, 3))
                                                 : std::nullopt;
  if (!years) {
    throw Error(ErrorCode::kInvariantViolation, "PatientAge '" + age + "'");
  }
  meta.age_years = *years;
  std::string lat = need(tags::kImageLaterality, "ImageLaterality");
  if (lat != "L" && lat != "R") {
    throw Error(ErrorCode::kInvariantViolation, "ImageLaterality '" + lat + "'");
  }
  meta.laterality = lat[0];
  std::string date = need(tags::kStudyDate, "StudyDate");
  auto parsed = Date::Parse(date);
  if (!parsed) {
    throw Error(ErrorCode::kInvariantViolation, "StudyDate '" + date + "'");
  }
  meta.study_date = *parsed;
  return meta;
}

// --- translation ---------------------------------------------------------

bool NativePlan::MatchesPatient(const PatientRow& p) const {
  if (patient_key && p.pseudonym != *patient_key) return false;
  if (sex && p.sex != *sex) return false;
  if (age && (p.age_years < age->first || p.age_years > age->second)) {
    return false;
  }
  return true;
}

bool NativePlan::MatchesImage(const ImageRow& i) const {
  if (laterality && i.laterality != *laterality) return false;
  if (kind && i.kind != *kind) return false;
  if (study_date &&
      (i.study_date < study_date->first || study_date->second < i.study_date)) {
    return false;
  }
  return true;
}

std::string NativePlan::Describe() const {
  std::vector<std::string> p;
  if (patient_key) p.push_back("p.pseudonym = '" + *patient_key + "'");
  if (sex) p.push_back(std::string("p.sex = '") + *sex + "'");
  if (age) {
    p.push_back("p.age BETWEEN " + std::to_string(age->first) + " AND " +
                std::to_string(age->second));
  }
  std::vector<std::string> i;
  if (laterality) i.push_back(std::string("i.laterality = '") + *laterality + "'");
  if (kind) i.push_back("i.kind = '" + std::string(ImageKindName(*kind)) + "'");
  if (study_date) {
    i.push_back("i.study_date BETWEEN '" + study_date->first.ToString() +
                "' AND '" + study_date->second.ToString() + "'");
  }
  auto join = [](const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (k > 0) out += " AND ";
      out += parts[k];
    }
    return out;
  };
  std::string out;
  if (target == Target::kPatients) {
    out = "SELECT p.* FROM patients p";
    std::vector<std::string> where = p;
    if (HasImageFilter()) {
      where.push_back("EXISTS (SELECT 1 FROM images i WHERE i.pseudonym = "
                      "p.pseudonym AND " + join(i) + ")");
    }
    if (!where.empty()) out += " WHERE " + join(where);
    out += " ORDER BY p.pseudonym";
  } else {
    out = "SELECT i.* FROM images i JOIN patients p ON i.pseudonym = p.pseudonym";
    std::vector<std::string> where = p;
    where.insert(where.end(), i.begin(), i.end());
    if (!where.empty()) out += " WHERE " + join(where);
    out += " ORDER BY i.sop_uid";
  }
  return out;
}

NativePlan TranslateQuery(const FormalQuery& q) {
  NativePlan plan;
  plan.target = q.target;
  for (const Predicate& p : q.conjuncts) {
    switch (p.attr) {
      case Attr::kPatientId:
        plan.patient_key = p.lo;
        break;
      case Attr::kPatientSex:
        plan.sex = p.lo[0];
        break;
      case Attr::kPatientAge: {
        int lo = std::stoi(p.lo);
        int hi = p.op == Op::kBetween ? std::stoi(p.hi) : lo;
        plan.age = {lo, hi};
        break;
      }
      case Attr::kImageLaterality:
        plan.laterality = p.lo[0];
        break;
      case Attr::kImageKind:
        plan.kind = ImageKindFromName(p.lo);
        break;
      case Attr::kImageStudyDate: {
        Date lo = *Date::Parse(p.lo);
        Date hi = p.op == Op::kBetween ? *Date::Parse(p.hi) : lo;
        plan.study_date = {lo, hi};
        break;
      }
    }
  }
  return plan;
}

// --- catalog -------------------------------------------------------------

Catalog::Catalog(std::string site) : site_(std::move(site)) {}

Catalog::~Catalog() {
  if (log_ != nullptr) std::fclose(log_);
}

std::unique_ptr<Catalog> Catalog::Open(std::string site,
                                       const std::filesystem::path& log_path,
                                       bool sync_writes) {
  auto catalog = std::make_unique<Catalog>(std::move(site));
  {
    std::ifstream in(log_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      catalog->ReplayLine(line, line_no);
    }
  }
  std::error_code ec;
  if (log_path.has_parent_path()) {
    std::filesystem::create_directories(log_path.parent_path(), ec);
  }
  catalog->log_ = std::fopen(log_path.c_str(), "ab");
  if (catalog->log_ == nullptr) {
    throw Error(ErrorCode::kIoFailure, "cannot open " + log_path.string());
  }
  catalog->sync_writes_ = sync_writes;
  return catalog;
}

void Catalog::ReplayLine(std::string_view line, std::size_t line_no) {
  auto corrupt = [&](std::string_view why) {
    throw Error(ErrorCode::kCorruptLog, "line " + std::to_string(line_no) +
                                            ": " + std::string(why));
  };
  auto f = SplitBars(line);
  try {
    if (f[0] == "P" && f.size() == 4) {
      auto age = ParseInt(f[3]);
      if (!IsHex16(f[1]) || (f[2] != "F" && f[2] != "M") || !age) {
        corrupt("bad patient record");
      }
      if (patients_.count(std::string(f[1])) != 0) corrupt("duplicate patient");
      ApplyPatient(PatientRow{std::string(f[1]), f[2][0], *age});
    } else if (f[0] == "I" && f.size() == 10) {
      ImageRegistration reg;
      auto patient = FindPatient(f[3]);
      if (!patient) corrupt("image before its patient");
      auto date = Date::Parse(f[5]);
      auto kind = ImageKindFromName(f[6]);
      auto lfn = Lfn::TryParse(f[2]);
      if (!date || !kind || !lfn || (f[4] != "L" && f[4] != "R")) {
        corrupt("bad image record");
      }
      std::uint64_t size = 0;
      try {
        size = std::stoull(std::string(f[8]));
      } catch (const std::exception&) {
        corrupt("bad size");
      }
      reg.meta = ImageMeta{std::string(f[1]), std::string(f[3]), patient->sex,
                           patient->age_years, f[4][0], *date};
      reg.lfn = *lfn;
      reg.kind = *kind;
      if (!f[7].empty()) reg.source_sop_uid = std::string(f[7]);
      reg.size_bytes = size;
      reg.checksum = std::string(f[9]);
      CheckImageLocked(reg);
      ApplyImage(ImageRow{reg.meta.sop_uid, reg.lfn.ToString(),
                          reg.meta.pseudonym, reg.meta.laterality,
                          reg.meta.study_date, reg.kind, reg.source_sop_uid,
                          reg.size_bytes, reg.checksum});
    } else if (f[0] == "A" && f.size() == 6) {
      if (f[5] != "0" && f[5] != "1") corrupt("bad builtin flag");
      AlgorithmRow row{std::string(f[1]), std::string(f[2]), std::string(f[3]),
                       std::string(f[4]), f[5] == "1"};
      auto key = std::make_pair(row.name, row.version);
      if (algorithms_.count(key) != 0) corrupt("duplicate algorithm");
      algorithm_by_lfn_[row.lfn] = key;
      algorithms_.emplace(key, std::move(row));
    } else {
      corrupt("unknown record '" + std::string(line.substr(0, 40)) + "'");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCorruptLog) throw;
    corrupt(e.what());
  }
}

void Catalog::Append(const std::string& line) {
  if (log_ == nullptr) return;
  bool ok = std::fputs(line.c_str(), log_) >= 0 && std::fputc('\n', log_) != EOF;
  ok = std::fflush(log_) == 0 && ok;
  if (ok && sync_writes_) ok = ::fsync(::fileno(log_)) == 0;
  if (!ok) throw Error(ErrorCode::kIoFailure, "catalog log append failed");
}

void Catalog::CheckImage(const ImageRegistration& reg) const {
  std::shared_lock lock(mu_);
  CheckImageLocked(reg);
}

void Catalog::CheckImageLocked(const ImageRegistration& reg) const {
  const ImageMeta& m = reg.meta;
  RequireField("sop_uid", m.sop_uid);
  RequireHex16("pseudonym", m.pseudonym);
  RequireHex16("checksum", reg.checksum);
  if (m.sex != 'F' && m.sex != 'M') {
    throw Error(ErrorCode::kInvalidArgument, "sex must be F or M");
  }
  if (m.laterality != 'L' && m.laterality != 'R') {
    throw Error(ErrorCode::kInvalidArgument, "laterality must be L or R");
  }
  if (m.age_years < 0) throw Error(ErrorCode::kInvalidArgument, "negative age");
  if (!m.study_date.IsValid()) {
    throw Error(ErrorCode::kInvalidArgument, "invalid study date");
  }
  if (reg.source_sop_uid) RequireField("source_sop_uid", *reg.source_sop_uid);
  if (images_.count(m.sop_uid) != 0) {
    throw Error(ErrorCode::kDuplicateSopUid, m.sop_uid);
  }
  if (image_by_lfn_.count(reg.lfn.ToString()) != 0 ||
      algorithm_by_lfn_.count(reg.lfn.ToString()) != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "lfn already registered: " + reg.lfn.ToString());
  }
  if (auto it = patients_.find(m.pseudonym);
      it != patients_.end() && it->second.sex != m.sex) {
    throw Error(ErrorCode::kSexMismatch, m.pseudonym);
  }
  if (reg.kind == ImageKind::kSmf) {
    auto src = reg.source_sop_uid ? images_.find(*reg.source_sop_uid)
                                   : images_.end();
    if (src == images_.end() || src->second.kind != ImageKind::kOriginal) {
      throw Error(ErrorCode::kDanglingSource,
                  reg.source_sop_uid.value_or("<absent>"));
    }
  } else if (reg.source_sop_uid) {
    throw Error(ErrorCode::kInvalidArgument, "ORIGINAL image with a source");
  }
}

void Catalog::ApplyPatient(PatientRow row) {
  std::string key = row.pseudonym;
  patients_.emplace(std::move(key), std::move(row));
}

void Catalog::ApplyImage(ImageRow row) {
  images_by_patient_[row.pseudonym].insert(row.sop_uid);
  image_by_lfn_[row.lfn] = row.sop_uid;
  std::string key = row.sop_uid;
  images_.emplace(std::move(key), std::move(row));
}

ImageRow Catalog::RegisterImage(const ImageRegistration& reg) {
  std::unique_lock lock(mu_);
  CheckImageLocked(reg);
  const ImageMeta& m = reg.meta;
  ImageRow row{m.sop_uid,           reg.lfn.ToString(), m.pseudonym,
               m.laterality,        m.study_date,       reg.kind,
               reg.source_sop_uid,  reg.size_bytes,     reg.checksum};
  if (patients_.count(m.pseudonym) == 0) {
    PatientRow patient{m.pseudonym, m.sex, m.age_years};
    Append("P|" + patient.pseudonym + "|" + patient.sex + "|" +
           std::to_string(patient.age_years));
    ApplyPatient(std::move(patient));
  }
  Append("I|" + row.sop_uid + "|" + row.lfn + "|" + row.pseudonym + "|" +
         row.laterality + "|" + row.study_date.ToString() + "|" +
         std::string(ImageKindName(row.kind)) + "|" +
         row.source_sop_uid.value_or("") + "|" +
         std::to_string(row.size_bytes) + "|" + row.checksum);
  ApplyImage(row);
  return row;
}

AlgorithmRow Catalog::RegisterAlgorithm(const AlgorithmRow& row) {
  RequireField("algorithm name", row.name);
  RequireField("algorithm version", row.version);
  RequireHex16("checksum", row.checksum);
  if (!Lfn::TryParse(row.lfn)) throw Error(ErrorCode::kInvalidLfn, row.lfn);
  std::unique_lock lock(mu_);
  auto key = std::make_pair(row.name, row.version);
  if (auto it = algorithms_.find(key); it != algorithms_.end()) {
    if (it->second.checksum != row.checksum) {
      throw Error(ErrorCode::kVersionConflict,
                  row.name + " " + row.version + ": registered " +
                      it->second.checksum + ", offered " + row.checksum);
    }
    return it->second;
  }
  if (image_by_lfn_.count(row.lfn) != 0 || algorithm_by_lfn_.count(row.lfn) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "lfn already registered: " + row.lfn);
  }
  Append("A|" + row.name + "|" + row.version + "|" + row.lfn + "|" +
         row.checksum + "|" + (row.builtin ? "1" : "0"));
  algorithm_by_lfn_[row.lfn] = key;
  algorithms_.emplace(key, row);
  return row;
}

Row Catalog::PatientToRow(const PatientRow& p) const {
  return Row{{"site", site_},
             {"patient.id", p.pseudonym},
             {"patient.sex", std::string(1, p.sex)},
             {"patient.age", std::to_string(p.age_years)}};
}

Row Catalog::ImageToRow(const ImageRow& i) const {
  return Row{{"site", site_},
             {"image.sop_uid", i.sop_uid},
             {"image.lfn", i.lfn},
             {"image.kind", std::string(ImageKindName(i.kind))},
             {"image.laterality", std::string(1, i.laterality)},
             {"image.study_date", i.study_date.ToString()},
             {"patient.id", i.pseudonym}};
}

std::vector<Row> Catalog::LocalQuery(const FormalQuery& q) const {
  return Execute(TranslateQuery(q));
}

std::vector<Row> Catalog::Execute(const NativePlan& plan) const {
  std::shared_lock lock(mu_);
  std::vector<Row> rows;
  auto any_image_matches = [&](const std::string& pseudonym) {
    auto it = images_by_patient_.find(pseudonym);
    if (it == images_by_patient_.end()) return false;
    for (const auto& sop : it->second) {
      if (plan.MatchesImage(images_.at(sop))) return true;
    }
    return false;
  };

  if (plan.target == Target::kPatients) {
    auto visit = [&](const PatientRow& p) {
      if (!plan.MatchesPatient(p)) return;
      if (plan.HasImageFilter() && !any_image_matches(p.pseudonym)) return;
      rows.push_back(PatientToRow(p));
    };
    if (plan.patient_key) {
      if (auto it = patients_.find(*plan.patient_key); it != patients_.end()) {
        visit(it->second);
      }
    } else {
      for (const auto& [key, p] : patients_) visit(p);
    }
    return rows;
  }

  auto visit = [&](const ImageRow& i) {
    if (!plan.MatchesImage(i)) return;
    if (!plan.MatchesPatient(patients_.at(i.pseudonym))) return;
    rows.push_back(ImageToRow(i));
  };
  if (plan.patient_key) {
    if (auto it = images_by_patient_.find(*plan.patient_key);
        it != images_by_patient_.end()) {
      for (const auto& sop : it->second) visit(images_.at(sop));
    }
  } else {
    for (const auto& [key, i] : images_) visit(i);
  }
  return rows;
}

LfnEntry Catalog::LookupLfn(std::string_view lfn) const {
  std::shared_lock lock(mu_);
  std::string key(lfn);
  if (auto it = image_by_lfn_.find(key); it != image_by_lfn_.end()) {
    const ImageRow& row = images_.at(it->second);
    return LfnEntry{row.size_bytes, row.checksum, LfnEntryKind::kImage, row.kind};
  }
  if (auto it = algorithm_by_lfn_.find(key); it != algorithm_by_lfn_.end()) {
    const AlgorithmRow& row = algorithms_.at(it->second);
    return LfnEntry{std::nullopt, row.checksum, LfnEntryKind::kAlgorithm,
                    std::nullopt};
  }
  throw Error(ErrorCode::kNotFound, key + " in catalog of " + site_);
}

std::optional<PatientRow> Catalog::FindPatient(std::string_view pseudonym) const {
  std::shared_lock lock(mu_);
  auto it = patients_.find(std::string(pseudonym));
  if (it == patients_.end()) return std::nullopt;
  return it->second;
}

std::optional<ImageRow> Catalog::FindImage(std::string_view sop_uid) const {
  std::shared_lock lock(mu_);
  auto it = images_.find(std::string(sop_uid));
  if (it == images_.end()) return std::nullopt;
  return it->second;
}

std::optional<ImageRow> Catalog::FindImageByLfn(std::string_view lfn) const {
  std::shared_lock lock(mu_);
  auto it = image_by_lfn_.find(std::string(lfn));
  if (it == image_by_lfn_.end()) return std::nullopt;
  return images_.at(it->second);
}

std::optional<AlgorithmRow> Catalog::FindAlgorithm(std::string_view name,
                                                   std::string_view version) const {
  std::shared_lock lock(mu_);
  auto it = algorithms_.find({std::string(name), std::string(version)});
  if (it == algorithms_.end()) return std::nullopt;
  return it->second;
}

std::size_t Catalog::patient_count() const {
  std::shared_lock lock(mu_);
  return patients_.size();
}

std::size_t Catalog::image_count() const {
  std::shared_lock lock(mu_);
  return images_.size();
}

std::size_t Catalog::algorithm_count() const {
  std::shared_lock lock(mu_);
  return algorithms_.size();
}

std::vector<PatientRow> Catalog::Patients() const {
  std::shared_lock lock(mu_);
  std::vector<PatientRow> out;
  for (const auto& [k, p] : patients_) out.push_back(p);
  return out;
}

std::vector<ImageRow> Catalog::Images() const {
  std::shared_lock lock(mu_);
  std::vector<ImageRow> out;
  for (const auto& [k, i] : images_) out.push_back(i);
  return out;
}

std::vector<AlgorithmRow> Catalog::Algorithms() const {
  std::shared_lock lock(mu_);
  std::vector<AlgorithmRow> out;
  for (const auto& [k, a] : algorithms_) out.push_back(a);
  return out;
}

}  // namespace mgvo
