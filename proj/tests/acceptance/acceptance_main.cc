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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Run with no arguments; MGVO_FIXTURE_DIR is baked in.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dicom_gen.h"
#include "mgvo/catalog.h"
#include "mgvo/central_node.h"
#include "mgvo/compute.h"
#include "mgvo/dicom.h"
#include "mgvo/error.h"
#include "mgvo/fnv.h"
#include "mgvo/harness.h"
#include "mgvo/query.h"
#include "mgvo/result_set.h"
#include "mgvo/scenario.h"
#include "mgvo/storage_element.h"
#include "mgvo/wire.h"
#include "test_util.h"
#include "wire_goldens.h"

namespace mgvo {
namespace {

using Clock = std::chrono::steady_clock;

// Collects failed checks for one criterion.
class Checker {
 public:
  void Expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  bool ok() const { return failed_ == 0; }
  int checks() const { return checks_; }
  int failed() const { return failed_; }
  const std::vector<std::string>& failures() const { return failures_; }
  std::string note;

 private:
  int checks_ = 0;
  int failed_ = 0;
  std::vector<std::string> failures_;
};

double SecondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::optional<ErrorCode> CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

std::size_t CountFiles(const std::filesystem::path& root) {
  std::size_t n = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    n += e.is_regular_file();
  }
  return n;
}

// 1. Federated results equal the centralized oracle.
void FederatedEquivalence(Checker& c) {
  auto start = Clock::now();
  int queries = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Scenario s = RandomScenario(seed);
    VoOptions options;
    options.federation.fanout_parallel = seed % 2 == 0;
    std::string token;
    auto vo = GenerateScenario(s, options, &token);
    OracleStore oracle = BuildOracle(*vo);
    std::mt19937_64 rng(seed * 7919);
    const auto names = vo->site_names();
    for (int i = 0; i < 20; ++i) {
      std::string text = RandomQuery(rng, oracle);
      const std::string& origin = names[rng() % names.size()];
      ResultSet r = vo->Query(origin, token, text);
      c.Expect(r.ErrorCount() == 0 && r.sites.size() == names.size(),
               "seed " + std::to_string(seed) + ": site errors for " + text);
      c.Expect(SameRowMultiset(CollectRows(r), OracleQuery(ParseQuery(text), oracle)),
               "seed " + std::to_string(seed) + " from " + origin + ": " + text);
      ++queries;
    }
  }
  double seconds = SecondsSince(start);
  c.Expect(seconds < 120.0, "took " + std::to_string(seconds) + " s");
  char buf[96];
  std::snprintf(buf, sizeof(buf), "50 scenarios, %d queries, %.1f s", queries, seconds);
  c.note = buf;
}

std::size_t CountRows(VirtualOrganisation& vo, const std::string& site, const std::string& token,
                      const std::string& text) {
  ResultSet r = vo.Query(site, token, text);
  return r.ErrorCount() == 0 ? r.RowCount() : static_cast<std::size_t>(-1);
}

// 2. SMF workflow on the holdings-shaped fixture.
void SmfWorkflow(Checker& c) {
  std::string token;
  auto vo = GenerateScenario(HoldingsFixture(), {}, &token, false);
  const auto names = vo->site_names();
  const std::string origin = names[0], owner = names[1];
  const std::string smf_query = "SELECT images WHERE image.kind = 'SMF'";
  std::size_t before = CountRows(*vo, origin, token, smf_query);

  ImageRow input = vo->site(owner).catalog().Images().front();
  vo->Request(origin, "ADD_ALG", token,
              Json{{"name", "smf-norm"}, {"version", "1"}, {"builtin", "smf-norm"}});
  Message job = vo->Request(origin, "EXEC_ALG", token,
                            Json{{"name", "smf-norm"}, {"version", "1"}, {"input_lfn", input.lfn}});
  c.Expect(job.payload.at("status") == "DONE", "job status");
  c.Expect(job.payload.at("site") == owner, "job ran at " + job.payload.at("site").dump());

  std::size_t after = CountRows(*vo, origin, token, smf_query);
  c.Expect(after == before + 1,
           "SMF count " + std::to_string(before) + " -> " + std::to_string(after));

  ResultSet r = vo->Query(origin, token, smf_query);
  std::string derived_sop;
  std::string derived_site;
  for (const auto& s : r.sites) {
    for (const auto& row : s.rows) {
      for (const auto& [k, v] : row) {
        if (k == "image.sop_uid") derived_sop = v;
        if (k == "site") derived_site = v;
      }
    }
  }
  c.Expect(derived_site == owner, "derived row at " + derived_site);
  auto row = vo->site(owner).catalog().FindImage(derived_sop);
  c.Expect(row && row->source_sop_uid == input.sop_uid, "source_sop_uid of derived row");
  c.Expect(derived_sop == DerivedSopUid(input.sop_uid, "smf-norm", "1"), "derived sop uid");

  // Running it again changes nothing.
  vo->Request(origin, "EXEC_ALG", token,
              Json{{"name", "smf-norm"}, {"version", "1"}, {"input_lfn", input.lfn}});
  c.Expect(CountRows(*vo, origin, token, smf_query) == before + 1, "repeat execution");
  c.note = origin + " -> " + owner + ", SMF rows " + std::to_string(before) + " -> " +
           std::to_string(after);
}

std::string PatientFile(const std::string& id, Date birth, const std::string& sop, char lat,
                        Date study, std::mt19937_64& rng) {
  return WriteDicom(SyntheticDicom({id, "TEST^PATIENT", 'F', birth}, {sop, lat, study}, rng));
}

// 3. Query shapes from the holdings table.
void QueryShapes(Checker& c) {
  std::string token;
  auto vo = GenerateScenario(HoldingsFixture(), {}, &token, false);
  OracleStore oracle = BuildOracle(*vo);
  const auto names = vo->site_names();

  std::size_t females = 0;
  for (const auto& name : names) {
    for (const auto& p : vo->site(name).catalog().Patients()) females += p.sex == 'F';
  }
  ResultSet all_female = vo->Query(names[0], token, "SELECT patients WHERE patient.sex = 'F'");
  c.Expect(all_female.ErrorCount() == 0 && all_female.RowCount() == females,
           "all female: " + std::to_string(all_female.RowCount()) + " vs " +
               std::to_string(females));

  std::size_t shaped = 0;
  for (const char* text :
       {"SELECT images WHERE patient.age BETWEEN 50 AND 60 AND image.laterality = 'L'",
        "SELECT patients WHERE patient.age BETWEEN 50 AND 60 AND image.laterality = 'L'"}) {
    ResultSet r = vo->Query(names[1], token, text);
    auto expected = OracleQuery(ParseQuery(text), oracle);
    c.Expect(r.ErrorCount() == 0 && SameRowMultiset(CollectRows(r), expected), text);
    if (shaped == 0) shaped = expected.size();
  }

  // Boundary ages: studies on, and one day before, the 50th and 61st
  // birthdays, plus the 60th.
  VirtualOrganisation edge;
  edge.AddSite("edge");
  edge.AddUser("u", "p");
  std::string t = edge.Login("edge", "u", "p");
  std::mt19937_64 rng(5060);
  const Date study{2004, 6, 15};
  struct Case {
    std::string id;
    Date birth;
    bool inside;
  };
  const std::vector<Case> cases = {
      {"AGE-49", {1954, 6, 16}, false},  // 50th birthday tomorrow
      {"AGE-50", {1954, 6, 15}, true},   // 50th birthday today
      {"AGE-60", {1944, 6, 15}, true},
      {"AGE-60B", {1943, 6, 16}, true},  // 61st birthday tomorrow
      {"AGE-61", {1943, 6, 15}, false},
  };
  int n = 0;
  for (const auto& k : cases) {
    edge.Add("edge", t, PatientFile(k.id, k.birth, "2.25.5060." + std::to_string(++n), 'L', study, rng));
  }
  ResultSet r = edge.Query(
      "edge", t, "SELECT patients WHERE patient.age BETWEEN 50 AND 60 AND image.laterality = 'L'");
  std::multiset<std::string> got;
  for (const auto& row : CollectRows(r)) {
    for (const auto& [key, v] : row) {
      if (key == "patient.age") got.insert(v);
    }
  }
  c.Expect(got == std::multiset<std::string>{"50", "60", "60"},
           "boundary ages returned " + std::to_string(got.size()) + " rows");
  for (const auto& k : cases) {
    ResultSet one = edge.Query("edge", t,
                               "SELECT patients WHERE patient.id = '" + Pseudonym("edge", k.id) +
                                   "' AND patient.age BETWEEN 50 AND 60");
    c.Expect((one.RowCount() == 1) == k.inside, "boundary case " + k.id);
  }

  // Soft bound: a local add of an 8 MiB file.
  DicomFile big = SyntheticDicom({"BIG-1", "BIG^FILE", 'M', {1950, 1, 1}},
                                 {"2.25.8.1", 'R', {2004, 1, 1}}, rng);
  std::vector<std::uint16_t> pixels(2048 * 2048);
  for (auto& p : pixels) p = static_cast<std::uint16_t>(rng());
  big.SetPixels(2048, 2048, pixels);
  std::string bytes = WriteDicom(big);
  auto start = Clock::now();
  std::string lfn = edge.Add("edge", t, bytes);
  double seconds = SecondsSince(start);
  c.Expect(bytes.size() >= (8u << 20), "file is " + std::to_string(bytes.size()) + " bytes");
  c.Expect(seconds < 2.0, "8 MiB add took " + std::to_string(seconds) + " s");
  c.Expect(edge.site("edge").storage().Stat(Lfn::Parse(lfn)).has_value(), "8 MiB file stored");

  char buf[160];
  std::snprintf(buf, sizeof(buf), "female=%zu, age[50,60]+L images=%zu, 8 MiB add %.2f s",
                females, shaped, seconds);
  c.note = buf;
}

// 4. DICOM subset.
void DicomSubset(Checker& c) {
  std::mt19937_64 rng(20030309);
  int round_trips = 0;
  for (int i = 0; i < 1000; ++i) {
    DicomFile f = testing::RandomDicomFile(rng);
    std::string bytes = WriteDicom(f);
    bool ok = ParseDicom(bytes) == f && WriteDicom(ParseDicom(bytes)) == bytes;
    c.Expect(ok, "round trip of random file " + std::to_string(i));
    round_trips += ok;
  }

  std::istringstream expected(
      testing::ReadFile(testing::FixturePath("dicom/malformed/expected.txt")));
  std::string name, code;
  int malformed = 0;
  while (expected >> name >> code) {
    ++malformed;
    std::string bytes = testing::ReadFile(testing::FixturePath("dicom/malformed/" + name));
    std::string got = "parsed";
    try {
      ParseDicom(bytes);
    } catch (const Error& e) {
      got = std::string(ErrorCodeName(e.code()));
    }
    c.Expect(got == code, name + ": " + got + " instead of " + code);
  }
  c.Expect(malformed == 20, "expected 20 malformed fixtures, found " + std::to_string(malformed));

  DicomFile sample = ParseDicom(testing::ReadFile(testing::FixturePath("dicom/sample.dcm")));
  Anonymized a = Anonymize(sample, "udine", Date{2003, 3, 9});
  c.Expect(!a.file.Has(tags::kPatientBirthDate), "birth date removed");
  c.Expect(a.file.GetText(tags::kPatientName) != sample.GetText(tags::kPatientName),
           "name replaced");
  c.Expect(a.file.GetText(tags::kPatientId) == Pseudonym("udine", "P-17"), "pseudonym");
  c.Expect(Pseudonym("udine", "P-17") == "5483d94a4ba91887", "pseudonym value");
  c.Expect(a.file.GetText(tags::kPatientAge) == "052Y", "age the day before the birthday");
  c.Expect(Anonymize(sample, "udine", Date{2003, 3, 10}).file.GetText(tags::kPatientAge) == "053Y",
           "age on the birthday");
  c.Expect(Anonymize(a.file, "udine", Date{2003, 3, 9}).file == a.file, "idempotent");
  c.note = std::to_string(round_trips) + "/1000 round trips, " + std::to_string(malformed) +
           " malformed fixtures";
}

// 5. Storage and transfer.
void StorageAndTransfer(Checker& c) {
  testing::TempDir dir;
  StorageElement a("north", dir / "a");
  StorageElement b("south", dir / "b");
  std::mt19937_64 rng(262144);
  int n = 0;
  for (std::size_t size : {std::size_t{0}, std::size_t{1}, std::size_t{262143},
                           std::size_t{262144}, std::size_t{262145}, std::size_t{4} << 20}) {
    Lfn lfn{"north", LfnCategory::kImages, "blob" + std::to_string(n++)};
    std::string bytes = testing::RandomBytes(rng, size);
    std::string sum = a.Put(lfn, bytes);
    c.Expect(sum == Checksum(bytes), "put checksum at " + std::to_string(size));
    c.Expect(a.Get(lfn) == bytes, "get at " + std::to_string(size));
    TransferReport r = Transfer(lfn, a, b);
    c.Expect(r.chunks == ChunkCount(size), "chunk count at " + std::to_string(size));
    c.Expect(b.Get(lfn) == bytes && r.checksum == sum, "transfer at " + std::to_string(size));
  }
  c.Expect(ChunkCount(262145) == 2, "262145 bytes take two chunks");

  Lfn victim{"north", LfnCategory::kImages, "victim"};
  a.Put(victim, testing::RandomBytes(rng, 1000));
  {
    std::fstream f(a.PathOf(victim), std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(500);
    char ch = static_cast<char>(f.get());
    f.seekp(500);
    f.put(static_cast<char>(ch ^ 0x01));
  }
  c.Expect(CodeOf([&] { a.Get(victim); }) == ErrorCode::kChecksumMismatch, "corruption detected");

  Lfn aborted{"north", LfnCategory::kImages, "aborted"};
  a.Put(aborted, testing::RandomBytes(rng, 3 * kChunkSize + 5));
  const std::size_t files_before = CountFiles(dir / "b");
  auto code = CodeOf([&] {
    Transfer(aborted, a, b, [](std::size_t i, std::string& chunk) {
      if (i == 2) chunk[0] ^= 0x40;
    });
  });
  c.Expect(code == ErrorCode::kChecksumMismatch, "tampered transfer rejected");
  c.Expect(!b.Contains(aborted) && !b.Stat(aborted), "no trace of aborted transfer");
  c.Expect(CountFiles(dir / "b") == files_before, "aborted transfer left files behind");
  c.note = "sizes 0..4 MiB, corruption and abort checked";
}

// 6. Loop freedom and partial failure.
void LoopFreedom(Checker& c) {
  const std::vector<std::string> all = {"east", "north", "south", "west"};
  std::string counts;
  for (std::size_t n = 1; n <= 4; ++n) {
    VirtualOrganisation vo;
    for (std::size_t i = 0; i < n; ++i) vo.AddSite(all[i]);
    vo.AddUser("u", "p");
    std::string t = vo.Login(all[0], "u", "p");
    for (std::size_t i = 0; i < n; ++i) {
      vo.network().ClearTrace();
      ResultSet r = vo.Query(all[i], t, "SELECT patients WHERE patient.sex = 'F'");
      std::size_t sent = vo.network().CountKind("QUERY_REMOTE_REQ");
      c.Expect(sent == n - 1, "N=" + std::to_string(n) + " sent " + std::to_string(sent));
      c.Expect(r.sites.size() == n, "N=" + std::to_string(n) + " site entries");
      if (i == 0) counts += (counts.empty() ? "" : ",") + std::to_string(sent);
    }
  }

  Scenario s = ParseScenario(
      "seed=66\n\nsite=east\npatients=40\nimages=90\n\nsite=north\npatients=30\nimages=60\n"
      "\nsite=south\npatients=25\nimages=70\n\nsite=west\npatients=10\nimages=10\n");
  std::string token;
  auto vo = GenerateScenario(s, {}, &token);
  const std::vector<std::string> queries = {"SELECT images WHERE image.laterality = 'L'",
                                            "SELECT patients WHERE patient.sex = 'M'"};
  for (const auto& q : queries) {
    ResultSet healthy = vo->Query("north", token, q);
    vo->InjectFault("south", Fault::Halt());
    ResultSet broken = vo->Query("north", token, q);
    vo->ClearFault("south");
    c.Expect(broken.ErrorCount() == 1, "exactly one ERROR entry");
    const SiteResult* down = broken.FindSite("south");
    c.Expect(down && down->status == SiteStatus::kError && down->message == "unreachable",
             "halted site reported unreachable");
    for (const auto& site : {"east", "north", "west"}) {
      const SiteResult* x = healthy.FindSite(site);
      const SiteResult* y = broken.FindSite(site);
      c.Expect(x && y && x->rows == y->rows, std::string("rows changed at ") + site);
    }
  }

  vo->AdvanceClock(kSessionLifetimeMs);
  for (const auto& site : vo->site_names()) {
    Message m = vo->RequestRaw(site, "QUERY", token,
                               Json{{"query", "SELECT patients WHERE patient.sex = 'F'"}});
    c.Expect(m.kind == "ERROR" && m.payload.value("code", "") == "Unauthenticated",
             "expired token accepted at " + site);
  }
  c.note = "remote requests for N=1..4: " + counts;
}

// 7. Wire protocol goldens.
void WireGoldens(Checker& c) {
  int frames = 0;
  std::string stream;
  std::vector<Message> messages;
  for (const auto& name : testing::GoldenFrameNames()) {
    auto g = testing::LoadGoldenFrame(name);
    c.Expect(EncodeFrame(g.message) == g.bytes, name + " encode");
    c.Expect(DecodeFrame(g.bytes) == g.message, name + " decode");
    stream += g.bytes;
    messages.push_back(g.message);
    ++frames;
  }
  auto max = testing::LoadMaxLengthGolden();
  std::string frame = EncodeFrame(max.message);
  c.Expect(frame.size() == max.frame_length && testing::HexPrefix(frame, 4) == max.header_hex &&
               Hex64(Fnv1a64(frame)) == max.fnv1a64,
           "max-length encode");
  c.Expect(DecodeFrame(frame) == max.message, "max-length decode");
  ++frames;

  std::mt19937_64 rng(100);
  int chunkings = 0;
  for (int round = 0; round < 100; ++round) {
    FrameDecoder d;
    std::vector<Message> got;
    for (std::size_t pos = 0; pos < stream.size();) {
      std::size_t n = std::min<std::size_t>(stream.size() - pos, 1 + rng() % 64);
      d.Feed(std::string_view(stream).substr(pos, n));
      pos += n;
      while (auto m = d.Next()) got.push_back(*m);
    }
    bool ok = got == messages && d.buffered() == 0;
    c.Expect(ok, "chunking round " + std::to_string(round));
    chunkings += ok;
  }
  c.note = std::to_string(frames) + " goldens, " + std::to_string(chunkings) + "/100 chunkings";
}

}  // namespace
}  // namespace mgvo

int main() {
  struct Criterion {
    const char* id;
    const char* title;
    void (*run)(mgvo::Checker&);
  };
  const Criterion criteria[] = {
      {"AC1", "federated equivalence", mgvo::FederatedEquivalence},
      {"AC2", "SMF workflow", mgvo::SmfWorkflow},
      {"AC3", "query shapes", mgvo::QueryShapes},
      {"AC4", "DICOM subset", mgvo::DicomSubset},
      {"AC5", "storage and transfer", mgvo::StorageAndTransfer},
      {"AC6", "loop freedom and partial failure", mgvo::LoopFreedom},
      {"AC7", "wire protocol goldens", mgvo::WireGoldens},
  };
  int failed = 0;
  for (const auto& k : criteria) {
    mgvo::Checker c;
    std::string crash;
    try {
      k.run(c);
    } catch (const std::exception& e) {
      crash = e.what();
    }
    const bool ok = c.ok() && crash.empty();
    failed += !ok;
    std::cout << (ok ? "PASS " : "FAIL ") << k.id << " " << k.title << " (" << c.checks()
              << " checks";
    if (!c.note.empty()) std::cout << "; " << c.note;
    std::cout << ")\n";
    if (!crash.empty()) std::cout << "    exception: " << crash << "\n";
    for (const auto& f : c.failures()) std::cout << "    " << f << "\n";
    if (c.failed() > static_cast<int>(c.failures().size())) {
      std::cout << "    ... " << c.failed() - static_cast<int>(c.failures().size())
                << " more\n";
    }
    std::cout.flush();
  }
  return failed == 0 ? 0 : 1;
}
