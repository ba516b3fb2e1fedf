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

#include <random>
#include <set>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "mgvo/central_node.h"
#include "mgvo/clock.h"
#include "mgvo/compute.h"
#include "mgvo/dicom.h"
#include "mgvo/error.h"
#include "mgvo/fnv.h"
#include "mgvo/harness.h"
#include "mgvo/scenario.h"
#include "mgvo/storage_element.h"
#include "mgvo/wire.h"
#include "test_util.h"

namespace mgvo {
namespace {

bool IsHex32(const std::string& s) {
  return s.size() == 32 && s.find_first_not_of("0123456789abcdef") == std::string::npos;
}

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::kInvalidArgument;
}

std::string ErrorCodeOf(const Message& m) {
  EXPECT_EQ(m.kind, "ERROR");
  return m.payload.value("code", "");
}

TEST(CentralNodeTest, Authenticate) {
  SimulatedClock clock;
  CentralNode central(clock, 1);
  central.AddUser("alice", "s3cret");
  SessionToken a = central.Authenticate("alice", "s3cret");
  SessionToken b = central.Authenticate("alice", "s3cret");
  EXPECT_TRUE(IsHex32(a.token)) << a.token;
  EXPECT_NE(a.token, b.token);
  EXPECT_EQ(a.user, "alice");
  EXPECT_EQ(a.expires_at_ms, clock.NowMs() + kSessionLifetimeMs);
  EXPECT_EQ(CodeOf([&] { central.Authenticate("alice", "wrong"); }), ErrorCode::kBadSecret);
  EXPECT_EQ(CodeOf([&] { central.Authenticate("bob", "s3cret"); }), ErrorCode::kUnknownUser);
}

TEST(CentralNodeTest, SeededTokensAreDeterministic) {
  SimulatedClock clock;
  CentralNode x(clock, 42), y(clock, 42);
  x.AddUser("alice", "s");
  y.AddUser("alice", "s");
  EXPECT_EQ(x.Authenticate("alice", "s").token, y.Authenticate("alice", "s").token);
}

TEST(CentralNodeTest, ValidateAndExpire) {
  SimulatedClock clock;
  CentralNode central(clock, 1);
  central.AddUser("alice", "s");
  SessionToken t = central.Authenticate("alice", "s");
  EXPECT_EQ(central.Validate(t.token).user, "alice");
  EXPECT_EQ(CodeOf([&] { central.Validate("garbage"); }), ErrorCode::kInvalidToken);
  clock.Advance(kSessionLifetimeMs - 1);
  EXPECT_EQ(central.Validate(t.token).user, "alice");
  clock.Advance(1);
  EXPECT_EQ(CodeOf([&] { central.Validate(t.token); }), ErrorCode::kExpired);
}

TEST(CentralNodeTest, Revoke) {
  SimulatedClock clock;
  CentralNode central(clock, 1);
  central.AddUser("alice", "s");
  SessionToken t = central.Authenticate("alice", "s");
  central.Revoke(t.token);
  EXPECT_EQ(CodeOf([&] { central.Validate(t.token); }), ErrorCode::kInvalidToken);
}

TEST(CentralNodeTest, Membership) {
  SimulatedClock clock;
  CentralNode central(clock, 1);
  central.RegisterSite({"oxford", "h:2"});
  auto sites = central.RegisterSite({"cambridge", "h:1"});
  ASSERT_EQ(sites.size(), 2u);
  EXPECT_EQ(sites[0].name, "cambridge");
  EXPECT_EQ(sites[1].name, "oxford");
  EXPECT_EQ(CodeOf([&] { central.RegisterSite({"oxford", "h:3"}); }), ErrorCode::kDuplicateSite);
  EXPECT_EQ(CodeOf([&] { central.RegisterSite({"Bad Name", "h:3"}); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([&] { central.RegisterSite({"_builtin", "h:3"}); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(central.ListSites(), sites);
}

TEST(CentralNodeTest, FrameInterface) {
  SimulatedClock clock;
  CentralNode central(clock, 1);
  central.AddUser("alice", "s");
  Message auth = DecodeFrame(central.HandleFrame(
      EncodeFrame({"AUTH", "", 5, Json{{"user", "alice"}, {"secret", "s"}}})));
  EXPECT_EQ(auth.kind, "AUTH_RESP");
  EXPECT_EQ(auth.id, 5u);
  std::string token = auth.payload.at("token");
  Message list = DecodeFrame(central.HandleFrame(EncodeFrame({"LIST_SITES", "", 6, {}})));
  EXPECT_EQ(ErrorCodeOf(list), "Unauthenticated");
  EXPECT_EQ(list.id, 6u);
  list = DecodeFrame(central.HandleFrame(EncodeFrame({"LIST_SITES", token, 7, {}})));
  EXPECT_EQ(list.kind, "LIST_SITES_RESP");
  Message v = DecodeFrame(central.HandleFrame(EncodeFrame({"VALIDATE_TOKEN", token, 8, {}})));
  EXPECT_EQ(v.payload.at("user"), "alice");
  Message bad = DecodeFrame(central.HandleFrame(EncodeFrame({"EXEC_ALG", token, 9, {}})));
  EXPECT_EQ(ErrorCodeOf(bad), "UnknownKind");
  Message junk = DecodeFrame(central.HandleFrame(std::string("\0\0\0\5hello", 9)));
  EXPECT_EQ(ErrorCodeOf(junk), "MalformedFrame");
}

std::string Dicom(std::mt19937_64& rng, const std::string& id, char sex, Date birth,
                  const std::string& sop, char lat, Date study) {
  return WriteDicom(SyntheticDicom({id, "DOE^JANE", sex, birth}, {sop, lat, study}, rng));
}

class SiteServicesTest : public ::testing::Test {
 protected:
  void SetUp() override {
    vo_.AddSite("north");
    vo_.AddSite("south");
    vo_.AddUser("alice", "pw");
    token_ = vo_.Login("north", "alice", "pw");
  }

  std::string AddTo(const std::string& site, const std::string& id, char sex, int n) {
    return vo_.Add(site, token_,
                   Dicom(rng_, id, sex, {1950, 3, 10}, "2.25.9." + std::to_string(n),
                         n % 2 ? 'L' : 'R', {2003, 3, 9}));
  }

  VirtualOrganisation vo_;
  std::string token_;
  std::mt19937_64 rng_{3};
};

TEST_F(SiteServicesTest, AuthThenQuery) {
  AddTo("north", "P-17", 'F', 1);
  AddTo("south", "P-18", 'F', 2);
  AddTo("south", "P-19", 'M', 3);
  Message r = vo_.Request("north", "QUERY", token_,
                          Json{{"query", "SELECT patients WHERE patient.sex = 'F'"}});
  EXPECT_EQ(r.kind, "QUERY_RESP");
  ResultSet rs = ParseResultSet(r.payload.at("xml").get<std::string>());
  EXPECT_EQ(rs.RowCount(), 2u);
  EXPECT_EQ(rs.sites[0].site, "north");
}

TEST_F(SiteServicesTest, AuthGateCoversEveryKind) {
  for (auto k : SiteRequestKinds()) {
    if (k == "AUTH") continue;
    for (const std::string& token : {std::string(), std::string("garbage"),
                                     std::string(32, '0')}) {
      Message m = vo_.RequestRaw("north", k, token, Json::object());
      EXPECT_EQ(ErrorCodeOf(m), "Unauthenticated") << k << " token=" << token;
    }
  }
}

TEST_F(SiteServicesTest, ErrorsAreFramesWithMatchingIds) {
  SiteNode& north = vo_.site("north");
  Message m = DecodeFrame(north.HandleFrame(EncodeFrame({"DELETE", token_, 77, {}})));
  EXPECT_EQ(ErrorCodeOf(m), "UnknownKind");
  EXPECT_EQ(m.id, 77u);
  // Length prefix disagrees with the byte count.
  std::string frame = EncodeFrame({"LIST_SITES", token_, 78, {}});
  frame[3] = static_cast<char>(frame[3] + 1);
  m = DecodeFrame(north.HandleFrame(frame));
  EXPECT_EQ(ErrorCodeOf(m), "MalformedFrame");
  m = vo_.RequestRaw("north", "QUERY", token_, Json{{"query", "SELECT nothing"}});
  EXPECT_EQ(ErrorCodeOf(m), "SyntaxError");
  m = vo_.RequestRaw("north", "QUERY", token_, Json{{"wrong", 1}});
  EXPECT_EQ(ErrorCodeOf(m), "MalformedFrame");
}

TEST_F(SiteServicesTest, ExpiredTokenDeniedEverywhere) {
  vo_.Request("south", "LIST_SITES", token_, {});
  vo_.AdvanceClock(kSessionLifetimeMs);
  for (const auto& site : vo_.site_names()) {
    Message m = vo_.RequestRaw(site, "LIST_SITES", token_, {});
    EXPECT_EQ(ErrorCodeOf(m), "Unauthenticated") << site;
    EXPECT_NE(m.payload.value("message", "").find("Expired"), std::string::npos);
  }
}

TEST_F(SiteServicesTest, RevocationTakesEffectWithinCacheTtl) {
  for (const auto& site : vo_.site_names()) vo_.Request(site, "LIST_SITES", token_, {});
  vo_.central().Revoke(token_);
  vo_.AdvanceClock(kTokenCacheTtlMs);
  for (const auto& site : vo_.site_names()) {
    EXPECT_EQ(ErrorCodeOf(vo_.RequestRaw(site, "LIST_SITES", token_, {})), "Unauthenticated");
  }
}

TEST_F(SiteServicesTest, TokenCacheLimitsCentralTraffic) {
  SiteNode& north = vo_.site("north");
  std::size_t before = north.central_validations();
  for (int i = 0; i < 10; ++i) vo_.Request("north", "LIST_SITES", token_, {});
  std::size_t cached = north.central_validations();
  EXPECT_LE(cached - before, 1u);
  vo_.AdvanceClock(kTokenCacheTtlMs);
  vo_.Request("north", "LIST_SITES", token_, {});
  EXPECT_EQ(north.central_validations(), cached + 1);
}

TEST_F(SiteServicesTest, NewSiteJoinsNextFanOut) {
  const std::string q = "SELECT patients WHERE patient.sex = 'M'";
  vo_.network().ClearTrace();
  EXPECT_EQ(vo_.Query("north", token_, q).sites.size(), 2u);
  EXPECT_EQ(vo_.network().CountKind("QUERY_REMOTE_REQ"), 1u);
  vo_.AddSite("west");
  vo_.network().ClearTrace();
  ResultSet r = vo_.Query("north", token_, q);
  EXPECT_EQ(r.sites.size(), 3u);
  EXPECT_NE(r.FindSite("west"), nullptr);
  EXPECT_EQ(vo_.network().CountKind("QUERY_REMOTE_REQ"), 2u);
}

TEST_F(SiteServicesTest, AddAnonymizesAtIngress) {
  std::string lfn = AddTo("north", "P-17", 'F', 1);
  Message r = vo_.Request("north", "RETRIEVE", token_, Json{{"lfn", lfn}});
  std::string bytes = Base64Decode(r.payload.at("data").get<std::string>());
  EXPECT_EQ(Checksum(bytes), r.payload.at("checksum"));
  EXPECT_EQ(bytes.find("P-17"), std::string::npos);
  EXPECT_EQ(bytes.find("DOE^JANE"), std::string::npos);
  DicomFile f = ParseDicom(bytes);
  EXPECT_EQ(f.GetText(tags::kPatientId), Pseudonym("north", "P-17"));
  // Study falls the day before the 53rd birthday.
  EXPECT_EQ(f.GetText(tags::kPatientAge), "052Y");
  EXPECT_FALSE(f.Has(tags::kPatientBirthDate));
  // Same file again: duplicate SOP UID.
  EXPECT_EQ(CodeOf([&] { AddTo("north", "P-17", 'F', 1); }), ErrorCode::kDuplicateSopUid);
}

TEST_F(SiteServicesTest, RemoteRetrieveLeavesReplicaAndQueriesUnchanged) {
  std::string lfn = AddTo("south", "P-1", 'F', 1);
  const std::string q = "SELECT images WHERE image.kind = 'ORIGINAL'";
  auto before = CollectRows(vo_.Query("north", token_, q));
  Message r = vo_.Request("north", "RETRIEVE", token_, Json{{"lfn", lfn}});
  EXPECT_EQ(r.payload.at("checksum"), vo_.site("south").storage().Stat(Lfn::Parse(lfn))->checksum);
  EXPECT_TRUE(vo_.site("north").storage().Stat(Lfn::Parse(lfn))->replica);
  EXPECT_TRUE(SameRowMultiset(CollectRows(vo_.Query("north", token_, q)), before));
  EXPECT_EQ(vo_.site("north").catalog().image_count(), 0u);
}

TEST_F(SiteServicesTest, ChunkedUploadThenAdd) {
  std::string bytes = Dicom(rng_, "P-2", 'M', {1960, 1, 1}, "2.25.7.7", 'R', {2004, 6, 1});
  // Pad the pixel data so the upload spans several chunks.
  DicomFile f = ParseDicom(bytes);
  std::vector<std::uint16_t> px(512 * 600, 7);
  f.SetPixels(512, 600, px);
  bytes = WriteDicom(f);
  ASSERT_GT(bytes.size(), 2 * kChunkSize);
  Message begin = vo_.Request("north", "FILE_PUT_BEGIN", token_,
                              Json{{"size", bytes.size()}, {"checksum", Checksum(bytes)}});
  std::string id = begin.payload.at("upload_id");
  for (std::size_t seq = 0; seq < ChunkCount(bytes.size()); ++seq) {
    vo_.Request("north", "FILE_CHUNK", token_,
                Json{{"upload_id", id},
                     {"seq", seq},
                     {"data", Base64Encode(bytes.substr(seq * kChunkSize, kChunkSize))}});
  }
  vo_.Request("north", "FILE_PUT_END", token_, Json{{"upload_id", id}});
  Message add = vo_.Request("north", "ADD", token_, Json{{"upload_id", id}});
  EXPECT_EQ(add.payload.at("lfn"), "lfn:/mgvo/north/images/2.25.7.7");
  EXPECT_EQ(vo_.site("north").catalog().image_count(), 1u);
}

TEST_F(SiteServicesTest, ChunkedUploadChecksumMismatch) {
  Message begin = vo_.Request("north", "FILE_PUT_BEGIN", token_,
                              Json{{"size", 3}, {"checksum", Checksum("abd")}});
  std::string id = begin.payload.at("upload_id");
  vo_.Request("north", "FILE_CHUNK", token_,
              Json{{"upload_id", id}, {"seq", 0}, {"data", Base64Encode("abc")}});
  EXPECT_EQ(CodeOf([&] { vo_.Request("north", "FILE_PUT_END", token_, Json{{"upload_id", id}}); }),
            ErrorCode::kChecksumMismatch);
}

TEST_F(SiteServicesTest, ExecuteRunsAtOwningSite) {
  std::string lfn = AddTo("south", "P-9", 'F', 1);
  vo_.Request("north", "ADD_ALG", token_,
              Json{{"name", "smf-norm"}, {"version", "1"}, {"builtin", "smf-norm"}});
  Message job = vo_.Request("north", "EXEC_ALG", token_,
                            Json{{"name", "smf-norm"}, {"version", "1"}, {"input_lfn", lfn}});
  EXPECT_EQ(job.payload.at("site"), "south");
  EXPECT_EQ(job.payload.at("status"), "DONE");
  EXPECT_EQ(vo_.site("south").catalog().image_count(), 2u);
  EXPECT_EQ(vo_.site("north").catalog().image_count(), 0u);
  EXPECT_EQ(CodeOf([&] {
              vo_.Request("north", "EXEC_ALG", token_,
                          Json{{"name", "cade"}, {"version", "1"}, {"input_lfn", lfn}});
            }),
            ErrorCode::kAlgorithmNotFound);
  EXPECT_EQ(CodeOf([&] {
              vo_.Request("north", "EXEC_ALG", token_,
                          Json{{"name", "smf-norm"},
                               {"version", "1"},
                               {"input_lfn", "lfn:/mgvo/nowhere/images/x"}});
            }),
            ErrorCode::kInputNotFound);
}

TEST_F(SiteServicesTest, ExecutablePushedToOwner) {
  std::string lfn = AddTo("south", "P-9", 'F', 1);
  std::string script = "#!/bin/sh\ncp \"$1\" \"$2\"\n";
  Message added = vo_.Request("north", "ADD_ALG", token_,
                              Json{{"name", "copy"}, {"version", "1"},
                                   {"data", Base64Encode(script)}});
  EXPECT_EQ(added.payload.at("lfn"), "lfn:/mgvo/north/algorithms/copy-1");
  Message job = vo_.Request("north", "EXEC_ALG", token_,
                            Json{{"name", "copy"}, {"version", "1"}, {"input_lfn", lfn}});
  EXPECT_EQ(job.payload.at("site"), "south");
  EXPECT_TRUE(vo_.site("south").storage().Contains(Lfn::Parse("lfn:/mgvo/north/algorithms/copy-1")));
  // A second version with other bytes is fine; the same version is not.
  EXPECT_EQ(CodeOf([&] {
              vo_.Request("north", "ADD_ALG", token_,
                          Json{{"name", "copy"}, {"version", "1"},
                               {"data", Base64Encode(script + "#")}});
            }),
            ErrorCode::kVersionConflict);
}

}  // namespace
}  // namespace mgvo
