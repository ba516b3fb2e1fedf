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

#include "mgvo/cli.h"

#include <sys/stat.h>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mgvo/central_node.h"
#include "mgvo/clock.h"
#include "mgvo/error.h"
#include "mgvo/fnv.h"
#include "mgvo/result_set.h"
#include "mgvo/site_node.h"
#include "mgvo/socket_transport.h"
#include "mgvo/storage_element.h"

namespace mgvo {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string ReadFileOrUsage(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string Env(const char* name) {
  const char* v = std::getenv(name);
  return v == nullptr ? std::string() : std::string(v);
}

// Answers until the real endpoint is attached; a site binds its socket
// before it knows its own node.
class DeferredEndpoint : public Endpoint {
 public:
  void Attach(Endpoint* e) { target_.store(e); }
  std::string HandleFrame(std::string_view frame) override {
    if (Endpoint* e = target_.load()) return e->HandleFrame(frame);
    return EncodeFrame(MakeError(0, "Unreachable", "node is starting"));
  }

 private:
  std::atomic<Endpoint*> target_{nullptr};
};

void BlockStopSignals(sigset_t* set) {
  sigemptyset(set);
  sigaddset(set, SIGINT);
  sigaddset(set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, set, nullptr);
}

void WaitForStopSignal(const sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
}

struct ClientOptions {
  std::string central;
  std::string site;
  std::string token_cache;
  std::int64_t timeout_ms = 30000;
};

class Client {
 public:
  Client(Transport& transport, const ClientOptions& options)
      : rpc_(transport, "cli"), options_(options) {}

  std::string Central() const {
    std::string c = options_.central.empty() ? Env("MGVO_CENTRAL") : options_.central;
    if (c.empty()) throw UsageError("no central node: pass --central or set MGVO_CENTRAL");
    return c;
  }

  fs::path CachePath() const {
    return options_.token_cache.empty() ? DefaultTokenCachePath()
                                        : fs::path(options_.token_cache);
  }

  CachedSession Session() const {
    try {
      return ReadTokenCache(CachePath());
    } catch (const Error& e) {
      throw Error(ErrorCode::kUnauthenticated, "not logged in (" + e.message() + ")");
    }
  }

  Message Call(const std::string& address, std::string_view kind,
               const std::string& token, Json payload) {
    return rpc_.Call(address, kind, token, std::move(payload), options_.timeout_ms);
  }

  std::vector<SiteInfo> Sites(const std::string& token) {
    return SitesFromJson(
        Call(Central(), kind::kListSites, token, Json::object()).payload.at("sites"));
  }

  // --site accepts a member name or a host:port.
  std::string SiteAddress(const std::string& token) {
    std::string want = options_.site.empty() ? Env("MGVO_SITE") : options_.site;
    if (want.find(':') != std::string::npos) return want;
    auto sites = Sites(token);
    for (const auto& s : sites) {
      if (want.empty() || s.name == want) return s.address;
    }
    throw Error(ErrorCode::kUnknownSite, want.empty() ? "the VO has no sites" : want);
  }

  // Inline payload, or a FILE_PUT_* upload for large files.
  Json Carry(const std::string& address, const std::string& token,
             const std::string& bytes) {
    if (bytes.size() <= kInlineUploadLimit) return Json{{"data", Base64Encode(bytes)}};
    std::string id = Call(address, kind::kFilePutBegin, token,
                          Json{{"size", bytes.size()}, {"checksum", Checksum(bytes)}})
                         .payload.at("upload_id")
                         .get<std::string>();
    const std::size_t chunks = ChunkCount(bytes.size());
    for (std::size_t i = 0; i < chunks; ++i) {
      Call(address, kind::kFileChunk, token,
           Json{{"upload_id", id},
                {"seq", i},
                {"data", Base64Encode(std::string_view(bytes).substr(i * kChunkSize, kChunkSize))}});
    }
    Call(address, kind::kFilePutEnd, token, Json{{"upload_id", id}});
    return Json{{"upload_id", id}};
  }

 private:
  RpcClient rpc_;
  ClientOptions options_;
};

int ServeCentral(const std::string& listen, const std::vector<std::string>& users,
                 std::ostream& out, std::ostream& err) {
  SystemClock clock;
  CentralNode central(clock);
  for (const auto& u : users) {
    auto colon = u.find(':');
    if (colon == std::string::npos || colon == 0) {
      throw UsageError("--user wants name:secret, got '" + u + "'");
    }
    central.AddUser(u.substr(0, colon), u.substr(colon + 1));
  }
  sigset_t signals;
  BlockStopSignals(&signals);
  std::unique_ptr<SocketServer> server;
  try {
    server = std::make_unique<SocketServer>(central, listen);
  } catch (const Error& e) {
    err << "error: " << e.message() << "\n";
    return kExitUsage;
  }
  out << "READY central " << server->address() << std::endl;
  WaitForStopSignal(signals);
  server->Stop();
  return kExitOk;
}

int ServeSite(SiteNodeConfig config, const std::string& listen, std::ostream& out,
              std::ostream& err) {
  if (config.central_address.empty()) config.central_address = Env("MGVO_CENTRAL");
  if (config.central_address.empty()) {
    throw UsageError("no central node: pass --central or set MGVO_CENTRAL");
  }
  if (config.name.empty()) throw UsageError("--name is required");
  if (config.store_root.empty()) config.store_root = fs::path("mgvo-" + config.name);

  sigset_t signals;
  BlockStopSignals(&signals);
  DeferredEndpoint deferred;
  std::unique_ptr<SocketServer> server;
  try {
    server = std::make_unique<SocketServer>(deferred, listen);
  } catch (const Error& e) {
    err << "error: " << e.message() << "\n";
    return kExitUsage;
  }
  auto [host, port] = SplitHostPort(server->address());
  config.address = (host == "0.0.0.0" ? "127.0.0.1" : host) + ":" + port;

  SocketTransport transport;
  SystemClock clock;
  std::unique_ptr<SiteNode> node;
  try {
    node = std::make_unique<SiteNode>(config, transport, clock);
    deferred.Attach(node.get());
    node->Start();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kUnreachable) {
      err << "error: central unreachable at " << config.central_address << "\n";
    } else if (e.code() == ErrorCode::kDuplicateSite) {
      err << "error: duplicate site name '" << config.name << "'\n";
    } else {
      err << "error: " << e.what() << "\n";
    }
    server->Stop();
    return kExitUsage;
  }
  out << "READY " << config.name << " " << config.address << std::endl;
  WaitForStopSignal(signals);
  server->Stop();
  return kExitOk;
}

}  // namespace

fs::path DefaultTokenCachePath() {
  std::string env = Env("MGVO_TOKEN_CACHE");
  if (!env.empty()) return env;
  std::string home = Env("HOME");
  return fs::path(home.empty() ? "." : home) / ".mgvo_token";
}

void WriteTokenCache(const fs::path& path, const CachedSession& s) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  }
  // Restrict before the token goes in.
  ::chmod(path.c_str(), S_IRUSR | S_IWUSR);
  std::ofstream out(path, std::ios::trunc);
  out << s.user << " " << s.token << " " << s.expires_at_ms << "\n";
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
}

CachedSession ReadTokenCache(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "no token cache at " + path.string());
  CachedSession s;
  std::string extra;
  if (!(in >> s.user >> s.token >> s.expires_at_ms) || (in >> extra)) {
    throw Error(ErrorCode::kInvalidArgument, "unreadable token cache " + path.string());
  }
  return s;
}

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
           Transport& transport) {
  CLI::App app{"mgvo: federated mammogram data grid node and client"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  ClientOptions client;
  app.add_option("--central", client.central,
                 "central node host:port (default: $MGVO_CENTRAL)");
  app.add_option("--site", client.site,
                 "site to talk to, by name or host:port (default: $MGVO_SITE, "
                 "else the first member)");
  app.add_option("--token-cache", client.token_cache,
                 "session file (default: $MGVO_TOKEN_CACHE or ~/.mgvo_token)");
  app.add_option("--rpc-timeout-ms", client.timeout_ms, "per-request timeout");

  auto* serve = app.add_subcommand("serve", "run a central or site node");
  serve->fallthrough();
  std::string role;
  std::string listen = "127.0.0.1:0";
  std::vector<std::string> users;
  SiteNodeConfig site_config;
  std::string store_root;
  bool sequential = false;
  serve->add_option("role", role, "central | site")
      ->required()
      ->check(CLI::IsMember({"central", "site"}));
  serve->add_option("--listen", listen, "host:port to bind (port 0 picks one)");
  serve->add_option("--user", users, "central: register user name:secret (repeatable)");
  serve->add_option("--name", site_config.name, "site: VO-unique lowercase name");
  serve->add_option("--store-root", store_root, "site: directory for catalog and files");
  serve->add_option("--timeout-ms", site_config.federation.per_site_timeout_ms,
                    "site: per-site timeout for federated queries")
      ->check(CLI::PositiveNumber);
  serve->add_option("--salt", site_config.salt, "site: pseudonymization salt (default: name)");
  serve->add_flag("--sequential", sequential, "site: query remote sites one at a time");

  auto* login = app.add_subcommand("login", "authenticate and cache a session token");
  login->fallthrough();
  std::string user, secret;
  login->add_option("--user", user)->required();
  login->add_option("--secret", secret)->required();

  auto* sites = app.add_subcommand("sites", "list VO member sites");
  sites->fallthrough();

  auto* add = app.add_subcommand("add", "anonymize and store a DICOM file; prints its LFN");
  add->fallthrough();
  std::string add_file;
  add->add_option("file", add_file)->required();

  auto* retrieve = app.add_subcommand("retrieve", "download a grid file");
  retrieve->fallthrough();
  std::string lfn_text, out_path;
  retrieve->add_option("lfn", lfn_text)->required();
  retrieve->add_option("out", out_path)->required();

  auto* query = app.add_subcommand("query", "run a federated query; XML on stdout");
  query->fallthrough();
  std::string query_text;
  query->add_option("text", query_text)->required();

  auto* add_alg = app.add_subcommand("add-alg", "register an algorithm");
  add_alg->fallthrough();
  std::string alg_name, alg_version, alg_builtin, alg_file;
  add_alg->add_option("--name", alg_name)->required();
  add_alg->add_option("--version", alg_version)->required();
  auto* builtin_opt = add_alg->add_option("--builtin", alg_builtin, "compiled-in id, e.g. smf-norm");
  auto* file_opt = add_alg->add_option("--file", alg_file, "executable: <exe> <input> <output>");
  builtin_opt->excludes(file_opt);

  auto* exec_alg = app.add_subcommand("exec-alg", "run an algorithm where the input lives");
  exec_alg->fallthrough();
  std::string input_lfn;
  exec_alg->add_option("--name", alg_name)->required();
  exec_alg->add_option("--version", alg_version)->required();
  exec_alg->add_option("--input", input_lfn)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (serve->parsed()) {
      if (role == "central") return ServeCentral(listen, users, out, err);
      site_config.central_address = client.central;
      site_config.store_root = store_root;
      site_config.federation.fanout_parallel = !sequential;
      return ServeSite(site_config, listen, out, err);
    }
    if ((add_alg->parsed()) && alg_builtin.empty() == alg_file.empty()) {
      throw UsageError("add-alg needs exactly one of --builtin or --file");
    }

    Client c(transport, client);
    if (login->parsed()) {
      Message r = c.Call(c.Central(), kind::kAuth, "",
                         Json{{"user", user}, {"secret", secret}});
      CachedSession s{r.payload.at("user").get<std::string>(),
                      r.payload.at("token").get<std::string>(),
                      r.payload.at("expires_at").get<std::int64_t>()};
      WriteTokenCache(c.CachePath(), s);
      out << s.user << " " << s.expires_at_ms << "\n";
      return kExitOk;
    }

    const CachedSession session = c.Session();
    const std::string& token = session.token;
    if (sites->parsed()) {
      for (const auto& s : c.Sites(token)) out << s.name << " " << s.address << "\n";
      return kExitOk;
    }
    if (add->parsed()) {
      std::string bytes = ReadFileOrUsage(add_file);
      std::string address = c.SiteAddress(token);
      Message r = c.Call(address, kind::kAdd, token, c.Carry(address, token, bytes));
      out << r.payload.at("lfn").get<std::string>() << "\n";
      return kExitOk;
    }
    if (retrieve->parsed()) {
      std::string address = c.SiteAddress(token);
      std::string bytes;
      std::size_t chunks = 1;
      std::string checksum;
      for (std::size_t i = 0; i < chunks; ++i) {
        Json p = c.Call(address, kind::kRetrieve, token,
                        Json{{"lfn", lfn_text}, {"chunk", i}})
                     .payload;
        chunks = p.at("chunks").get<std::size_t>();
        checksum = p.at("checksum").get<std::string>();
        bytes += Base64Decode(p.at("data").get<std::string>());
      }
      if (Checksum(bytes) != checksum) {
        throw Error(ErrorCode::kChecksumMismatch, lfn_text);
      }
      std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
      f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!f) throw UsageError("cannot write " + out_path);
      out << lfn_text << " " << bytes.size() << " " << checksum << "\n";
      return kExitOk;
    }
    if (query->parsed()) {
      Message r = c.Call(c.SiteAddress(token), kind::kQuery, token,
                         Json{{"query", query_text}});
      std::string xml = r.payload.at("xml").get<std::string>();
      out << xml << "\n";
      ResultSet rs = ParseResultSet(xml);
      for (const auto& s : rs.sites) {
        if (s.status == SiteStatus::kOk) {
          err << s.site << ": " << s.rows.size() << " rows\n";
        } else {
          err << s.site << ": ERROR " << s.message << "\n";
        }
      }
      err << "total: " << rs.RowCount() << " rows from " << rs.sites.size() << " sites\n";
      return rs.ErrorCount() > 0 ? kExitPartial : kExitOk;
    }
    if (add_alg->parsed()) {
      std::string address = c.SiteAddress(token);
      Json payload{{"name", alg_name}, {"version", alg_version}};
      if (!alg_builtin.empty()) {
        payload["builtin"] = alg_builtin;
      } else {
        payload.update(c.Carry(address, token, ReadFileOrUsage(alg_file)));
      }
      Message r = c.Call(address, kind::kAddAlg, token, payload);
      out << r.payload.at("lfn").get<std::string>() << "\n";
      return kExitOk;
    }
    if (exec_alg->parsed()) {
      Message r = c.Call(c.SiteAddress(token), kind::kExecAlg, token,
                         Json{{"name", alg_name},
                              {"version", alg_version},
                              {"input_lfn", input_lfn}});
      const Json& p = r.payload;
      out << (p.at("output_lfn").is_null() ? "" : p.at("output_lfn").get<std::string>())
          << "\n";
      err << "job " << p.at("job_id").get<std::string>() << " "
          << p.at("status").get<std::string>() << " at " << p.at("site").get<std::string>()
          << (p.value("idempotent", false) ? " (already derived)" : "") << "\n";
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const Json::exception& e) {
    err << "error: malformed response: " << e.what() << "\n";
    return kExitProtocol;
  }
  return kExitUsage;
}

}  // namespace mgvo
