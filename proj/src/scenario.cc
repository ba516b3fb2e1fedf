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

#include "mgvo/scenario.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mgvo/error.h"
#include "mgvo/fnv.h"
#include "mgvo/lfn.h"

namespace mgvo {

namespace {

// Portable across standard libraries, unlike the <random> distributions.
std::uint64_t Uniform(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) {
  return lo + rng() % (hi - lo + 1);
}

Date AddDays(const Date& d, int days) {
  using namespace std::chrono;
  sys_days base = year_month_day{year{d.year}, month{static_cast<unsigned>(d.month)},
                                 day{static_cast<unsigned>(d.day)}};
  year_month_day out{base + std::chrono::days{days}};
  return Date{static_cast<int>(out.year()), static_cast<int>(unsigned(out.month())),
              static_cast<int>(unsigned(out.day()))};
}

int ToInt(std::string_view text, std::string_view what) {
  try {
    std::size_t used = 0;
    int v = std::stoi(std::string(text), &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kInvalidArgument,
              "bad " + std::string(what) + " '" + std::string(text) + "'");
}

std::vector<std::string_view> SplitBar(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto bar = line.find('|', start);
    out.push_back(line.substr(start, bar == std::string_view::npos ? bar : bar - start));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return out;
}

}  // namespace

Scenario ParseScenario(std::string_view text) {
  Scenario s;
  std::vector<std::vector<std::pair<std::string, std::string>>> blocks(1);
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      if (!blocks.back().empty()) blocks.emplace_back();
      continue;
    }
    if (line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "line " + std::to_string(line_no) + ": expected key=value");
    }
    blocks.back().emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  bool seen_seed = false;
  for (const auto& block : blocks) {
    if (block.empty()) continue;
    std::map<std::string, std::string> kv;
    for (const auto& [k, v] : block) {
      if (!kv.emplace(k, v).second) {
        throw Error(ErrorCode::kInvalidArgument, "repeated key '" + k + "'");
      }
    }
    auto take = [&](const std::string& key) {
      auto it = kv.find(key);
      if (it == kv.end()) throw Error(ErrorCode::kInvalidArgument, "missing " + key);
      std::string v = it->second;
      kv.erase(it);
      return v;
    };
    const std::string head = block.front().first;
    if (head == "seed") {
      if (seen_seed) throw Error(ErrorCode::kInvalidArgument, "second seed block");
      seen_seed = true;
      std::string v = take("seed");
      try {
        std::size_t used = 0;
        s.seed = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kInvalidArgument, "bad seed '" + v + "'");
      }
    } else if (head == "site") {
      SiteSpec spec;
      spec.name = take("site");
      spec.n_patients = ToInt(take("patients"), "patients");
      spec.n_images = ToInt(take("images"), "images");
      s.sites.push_back(spec);
    } else if (head == "fault") {
      FaultSpec f;
      f.fault = Fault::Parse(take("fault"));
      f.site = take("site");
      s.faults.push_back(f);
    } else if (head == "query") {
      s.queries.push_back(take("query"));
    } else {
      throw Error(ErrorCode::kInvalidArgument, "unknown block '" + head + "'");
    }
    if (!kv.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "unexpected key '" + kv.begin()->first + "'");
    }
  }
  return s;
}

std::string FormatScenario(const Scenario& s) {
  std::ostringstream out;
  out << "seed=" << s.seed << "\n";
  for (const auto& site : s.sites) {
    out << "\nsite=" << site.name << "\npatients=" << site.n_patients
        << "\nimages=" << site.n_images << "\n";
  }
  for (const auto& f : s.faults) {
    out << "\nfault=" << f.fault.ToString() << "\nsite=" << f.site << "\n";
  }
  for (const auto& q : s.queries) out << "\nquery=" << q << "\n";
  return out.str();
}

void ValidateScenario(const Scenario& s, bool enforce_size_limits) {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::kInvalidArgument, m); };
  if (s.sites.empty() || s.sites.size() > kMaxScenarioSites) {
    bad("scenario needs 1-" + std::to_string(kMaxScenarioSites) + " sites");
  }
  std::set<std::string> names;
  for (const auto& site : s.sites) {
    if (!IsValidSiteName(site.name) || site.name == kBuiltinSite) {
      bad("bad site name '" + site.name + "'");
    }
    if (!names.insert(site.name).second) bad("duplicate site '" + site.name + "'");
    if (site.n_patients < 0 || site.n_images < site.n_patients ||
        (site.n_patients == 0 && site.n_images != 0)) {
      bad(site.name + ": every patient needs an image and every image a patient");
    }
    if (enforce_size_limits && (site.n_patients > kMaxScenarioPatients ||
                                site.n_images > kMaxScenarioImages)) {
      bad(site.name + ": over the per-site limits");
    }
  }
  for (const auto& f : s.faults) {
    if (names.count(f.site) == 0) bad("fault for unknown site '" + f.site + "'");
  }
  for (const auto& q : s.queries) ParseQuery(q);
}

Scenario HoldingsFixture(std::uint64_t seed) {
  Scenario s;
  s.seed = seed;
  s.sites = {{"site-a", 813, 2798}, {"site-b", 489, 4663}};
  return s;
}

Scenario RandomScenario(std::uint64_t seed) {
  static const char* kNames[] = {"north", "south", "east", "west"};
  std::mt19937_64 rng(seed);
  Scenario s;
  s.seed = seed;
  const int n_sites = static_cast<int>(Uniform(rng, 2, kMaxScenarioSites));
  for (int i = 0; i < n_sites; ++i) {
    SiteSpec spec;
    spec.name = kNames[i];
    spec.n_patients = static_cast<int>(Uniform(rng, 1, kMaxScenarioPatients));
    spec.n_images = static_cast<int>(Uniform(rng, spec.n_patients, kMaxScenarioImages));
    s.sites.push_back(spec);
  }
  return s;
}

DicomFile SyntheticDicom(const SyntheticPatient& patient, const SyntheticImage& image,
                         std::mt19937_64& rng, int rows, int columns) {
  DicomFile f;
  f.SetText(tags::kSopInstanceUid, Vr::kUI, image.sop_uid);
  f.SetText(tags::kStudyDate, Vr::kDA, image.study_date.ToString());
  f.SetText(tags::kPatientName, Vr::kPN, patient.name);
  f.SetText(tags::kPatientId, Vr::kLO, patient.patient_id);
  f.SetText(tags::kPatientBirthDate, Vr::kDA, patient.birth.ToString());
  f.SetText(tags::kPatientSex, Vr::kCS, std::string(1, patient.sex));
  f.SetText(tags::kImageLaterality, Vr::kCS, std::string(1, image.laterality));
  std::vector<std::uint16_t> samples(static_cast<std::size_t>(rows) * columns);
  for (auto& v : samples) v = static_cast<std::uint16_t>(rng() & 0x0FFF);
  f.SetPixels(static_cast<std::uint16_t>(rows), static_cast<std::uint16_t>(columns),
              samples);
  return f;
}

std::unique_ptr<VirtualOrganisation> GenerateScenario(const Scenario& s,
                                                      VoOptions options,
                                                      std::string* token,
                                                      bool enforce_size_limits) {
  ValidateScenario(s, enforce_size_limits);
  options.seed = s.seed;
  auto vo = std::make_unique<VirtualOrganisation>(options);
  vo->AddUser(std::string(kHarnessUser), kHarnessSecret);
  for (const auto& site : s.sites) vo->AddSite(site.name);
  const std::string session = vo->Login(s.sites.front().name, std::string(kHarnessUser),
                                        std::string(kHarnessSecret));

  const Date epoch{2000, 1, 1};
  for (const auto& site : s.sites) {
    std::mt19937_64 rng(s.seed ^ Fnv1a64("data:" + site.name));
    const std::uint64_t uid_root = Fnv1a64(site.name) % 1000000;
    // Every patient gets one image; the rest are spread at random.
    std::vector<int> per_patient(site.n_patients, 1);
    for (int i = site.n_patients; i < site.n_images; ++i) {
      ++per_patient[Uniform(rng, 0, site.n_patients - 1)];
    }
    int image_no = 0;
    for (int p = 0; p < site.n_patients; ++p) {
      SyntheticPatient patient;
      char id[32];
      std::snprintf(id, sizeof(id), "P%05d", p + 1);
      patient.patient_id = site.name + "-" + id;
      patient.name = "DOE^" + std::string(id);
      patient.sex = Uniform(rng, 0, 1) == 0 ? 'F' : 'M';
      const int age = static_cast<int>(Uniform(rng, 30, 80));
      const Date first = AddDays(epoch, static_cast<int>(Uniform(rng, 0, 2190)));
      // Born `age` completed years before the first study.
      patient.birth.year = first.year - age;
      patient.birth.month = static_cast<int>(Uniform(rng, 1, first.month));
      patient.birth.day = static_cast<int>(Uniform(rng, 1, 28));
      if (patient.birth.month == first.month) {
        patient.birth.day = std::min(patient.birth.day, first.day);
      }
      for (int k = 0; k < per_patient[p]; ++k) {
        SyntheticImage image;
        image.sop_uid = "2.25." + std::to_string(uid_root) + "." + std::to_string(++image_no);
        image.laterality = Uniform(rng, 0, 1) == 0 ? 'L' : 'R';
        image.study_date =
            k == 0 ? first : AddDays(first, static_cast<int>(Uniform(rng, 0, 730)));
        vo->Add(site.name, session, WriteDicom(SyntheticDicom(patient, image, rng)));
      }
    }
  }
  for (const auto& f : s.faults) vo->InjectFault(f.site, f.fault);
  if (token != nullptr) *token = session;
  return vo;
}

void OracleStore::Index() {
  by_patient.clear();
  patient_index.clear();
  for (std::size_t i = 0; i < patients.size(); ++i) {
    patient_index[{patients[i].site, patients[i].pseudonym}] = i;
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    by_patient[{images[i].site, images[i].pseudonym}].push_back(i);
  }
}

void ReplayCatalogLogInto(const std::string& site, const std::filesystem::path& log,
                          OracleStore& store) {
  std::ifstream in(log);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = SplitBar(line);
    if (f[0] == "P" && f.size() == 4) {
      store.patients.push_back(OraclePatient{site, std::string(f[1]), f[2][0],
                                             ToInt(f[3], "age")});
    } else if (f[0] == "I" && f.size() == 10) {
      store.images.push_back(OracleImage{site, std::string(f[1]), std::string(f[2]),
                                         std::string(f[3]), f[4][0],
                                         ToInt(f[5], "date"), std::string(f[6])});
    } else if (f[0] != "A") {
      throw Error(ErrorCode::kCorruptLog, log.string() + ": " + line);
    }
  }
}

OracleStore BuildOracle(VirtualOrganisation& vo) {
  OracleStore store;
  for (const auto& name : vo.site_names()) {
    ReplayCatalogLogInto(name, vo.site(name).catalog_log_path(), store);
  }
  store.Index();
  return store;
}

std::vector<Row> OracleQuery(const FormalQuery& q, const OracleStore& oracle) {
  auto patient_ok = [&](const OraclePatient& p) {
    for (const auto& c : q.conjuncts) {
      switch (c.attr) {
        case Attr::kPatientSex:
          if (std::string(1, p.sex) != c.lo) return false;
          break;
        case Attr::kPatientId:
          if (p.pseudonym != c.lo) return false;
          break;
        case Attr::kPatientAge:
          if (c.op == Op::kEq ? p.age != std::stoi(c.lo)
                              : (p.age < std::stoi(c.lo) || p.age > std::stoi(c.hi))) {
            return false;
          }
          break;
        default:
          break;
      }
    }
    return true;
  };
  bool has_image_terms = false;
  auto image_ok = [&](const OracleImage& i) {
    for (const auto& c : q.conjuncts) {
      switch (c.attr) {
        case Attr::kImageLaterality:
          if (std::string(1, i.laterality) != c.lo) return false;
          break;
        case Attr::kImageKind:
          if (i.kind != c.lo) return false;
          break;
        case Attr::kImageStudyDate:
          if (c.op == Op::kEq ? i.study_date != std::stoi(c.lo)
                              : (i.study_date < std::stoi(c.lo) ||
                                 i.study_date > std::stoi(c.hi))) {
            return false;
          }
          break;
        default:
          break;
      }
    }
    return true;
  };
  for (const auto& c : q.conjuncts) {
    has_image_terms = has_image_terms || c.attr == Attr::kImageLaterality ||
                      c.attr == Attr::kImageKind || c.attr == Attr::kImageStudyDate;
  }

  std::vector<Row> rows;
  if (q.target == Target::kPatients) {
    for (const auto& p : oracle.patients) {
      if (!patient_ok(p)) continue;
      bool any = !has_image_terms;
      if (!any) {
        auto it = oracle.by_patient.find({p.site, p.pseudonym});
        if (it != oracle.by_patient.end()) {
          for (std::size_t i : it->second) any = any || image_ok(oracle.images[i]);
        }
      }
      if (!any) continue;
      rows.push_back(Row{{"site", p.site},
                         {"patient.id", p.pseudonym},
                         {"patient.sex", std::string(1, p.sex)},
                         {"patient.age", std::to_string(p.age)}});
    }
  } else {
    for (const auto& i : oracle.images) {
      auto pi = oracle.patient_index.find({i.site, i.pseudonym});
      if (pi == oracle.patient_index.end()) continue;
      if (!patient_ok(oracle.patients[pi->second]) || !image_ok(i)) continue;
      rows.push_back(Row{{"site", i.site},
                         {"image.sop_uid", i.sop_uid},
                         {"image.lfn", i.lfn},
                         {"image.kind", i.kind},
                         {"image.laterality", std::string(1, i.laterality)},
                         {"image.study_date", std::to_string(i.study_date)},
                         {"patient.id", i.pseudonym}});
    }
  }
  return rows;
}

std::string RandomQuery(std::mt19937_64& rng, const OracleStore& oracle) {
  std::vector<std::string> attrs = {"patient.sex",      "patient.age", "patient.id",
                                    "image.laterality", "image.kind",  "image.study_date"};
  for (std::size_t i = attrs.size() - 1; i > 0; --i) {
    std::swap(attrs[i], attrs[Uniform(rng, 0, i)]);
  }
  const std::size_t n = Uniform(rng, 1, 3);
  std::string text = Uniform(rng, 0, 1) == 0 ? "SELECT PATIENTS WHERE "
                                             : "SELECT IMAGES WHERE ";
  for (std::size_t k = 0; k < n; ++k) {
    const std::string& a = attrs[k];
    std::string term;
    if (a == "patient.sex") {
      term = a + " = '" + (Uniform(rng, 0, 1) == 0 ? "F" : "M") + "'";
    } else if (a == "patient.age") {
      if (Uniform(rng, 0, 9) < 7) {
        auto lo = Uniform(rng, 25, 80);
        term = a + " BETWEEN " + std::to_string(lo) + " AND " +
               std::to_string(lo + Uniform(rng, 0, 30));
      } else {
        term = a + " = '" + std::to_string(Uniform(rng, 30, 80)) + "'";
      }
    } else if (a == "patient.id") {
      std::string id;
      if (!oracle.patients.empty() && Uniform(rng, 0, 4) != 0) {
        id = oracle.patients[Uniform(rng, 0, oracle.patients.size() - 1)].pseudonym;
      } else {
        id = Hex64(rng());
      }
      term = a + " = '" + id + "'";
    } else if (a == "image.laterality") {
      term = a + " = '" + (Uniform(rng, 0, 1) == 0 ? "L" : "R") + "'";
    } else if (a == "image.kind") {
      term = a + " = '" + (Uniform(rng, 0, 6) == 0 ? "SMF" : "ORIGINAL") + "'";
    } else {
      if (!oracle.images.empty() && Uniform(rng, 0, 3) == 0) {
        term = a + " = '" +
               std::to_string(oracle.images[Uniform(rng, 0, oracle.images.size() - 1)]
                                  .study_date) +
               "'";
      } else {
        const Date epoch{2000, 1, 1};
        Date d1 = AddDays(epoch, static_cast<int>(Uniform(rng, 0, 2900)));
        Date d2 = AddDays(d1, static_cast<int>(Uniform(rng, 0, 1200)));
        term = a + " BETWEEN " + d1.ToString() + " AND " + d2.ToString();
      }
    }
    text += (k == 0 ? "" : " AND ") + term;
  }
  return text;
}

std::vector<Row> CollectRows(const ResultSet& r) {
  std::vector<Row> rows;
  for (const auto& s : r.sites) {
    if (s.status == SiteStatus::kOk) rows.insert(rows.end(), s.rows.begin(), s.rows.end());
  }
  return rows;
}

bool SameRowMultiset(std::vector<Row> a, std::vector<Row> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

}  // namespace mgvo
