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
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mgvo/date.h"
#include "mgvo/dicom.h"
#include "mgvo/harness.h"
#include "mgvo/query.h"
#include "mgvo/result_set.h"

namespace mgvo {

inline constexpr int kMaxScenarioSites = 4;
inline constexpr int kMaxScenarioPatients = 200;
inline constexpr int kMaxScenarioImages = 1000;

struct SiteSpec {
  std::string name;
  int n_patients = 0;
  int n_images = 0;

  bool operator==(const SiteSpec&) const = default;
};

struct FaultSpec {
  std::string site;
  Fault fault;

  bool operator==(const FaultSpec&) const = default;
};

struct Scenario {
  std::uint64_t seed = 1;
  std::vector<SiteSpec> sites;
  std::vector<FaultSpec> faults;
  std::vector<std::string> queries;

  bool operator==(const Scenario&) const = default;
};

// Blank-line separated blocks of key=value lines; '#' starts a comment line.
// The first key names the block: seed, site (+ patients, images),
// fault (+ site) or query.
Scenario ParseScenario(std::string_view text);
std::string FormatScenario(const Scenario& s);

// Throws InvalidArgument for specs outside the scenario limits.
void ValidateScenario(const Scenario& s, bool enforce_size_limits = true);

// Two sites holding 813 patients / 2798
// images and 489 patients / 4663 images. Content is synthetic.
Scenario HoldingsFixture(std::uint64_t seed = 2004);

// 2-4 sites within the scenario limits, no faults, no queries.
Scenario RandomScenario(std::uint64_t seed);

struct SyntheticPatient {
  std::string patient_id;
  std::string name;
  char sex = 'F';
  Date birth;
};

struct SyntheticImage {
  std::string sop_uid;
  char laterality = 'L';
  Date study_date;
};

DicomFile SyntheticDicom(const SyntheticPatient& patient,
                         const SyntheticImage& image, std::mt19937_64& rng,
                         int rows = 4, int columns = 4);

// Builds the VO, ingests every site's synthetic images through real ADD
// requests, then applies the faults. The harness user is logged in; its
// token is returned through `token` when non-null.
std::unique_ptr<VirtualOrganisation> GenerateScenario(const Scenario& s,
                                                      VoOptions options = {},
                                                      std::string* token = nullptr,
                                                      bool enforce_size_limits = true);

struct OraclePatient {
  std::string site;
  std::string pseudonym;
  char sex = 'F';
  int age = 0;
};

struct OracleImage {
  std::string site;
  std::string sop_uid;
  std::string lfn;
  std::string pseudonym;
  char laterality = 'L';
  int study_date = 0;  // YYYYMMDD as a number
  std::string kind;
};

// Union of all sites' rows, read straight from the catalog logs.
struct OracleStore {
  std::vector<OraclePatient> patients;
  std::vector<OracleImage> images;
  // (site, pseudonym) -> indexes into `images`
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> by_patient;
  std::map<std::pair<std::string, std::string>, std::size_t> patient_index;

  void Index();
};

void ReplayCatalogLogInto(const std::string& site, const std::filesystem::path& log,
                          OracleStore& store);
OracleStore BuildOracle(VirtualOrganisation& vo);

// Full-scan conjunction filter, independent of the catalog's evaluator.
std::vector<Row> OracleQuery(const FormalQuery& q, const OracleStore& oracle);

// Random conjunctive query text over the oracle's value ranges.
std::string RandomQuery(std::mt19937_64& rng, const OracleStore& oracle);

// Rows of every OK site entry.
std::vector<Row> CollectRows(const ResultSet& r);
bool SameRowMultiset(std::vector<Row> a, std::vector<Row> b);

}  // namespace mgvo
