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

#include "mgvo/result_set.h"

#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <set>

#include "mgvo/error.h"
#include "mgvo/fnv.h"

namespace mgvo {
namespace {

constexpr std::array<std::string_view, 4> kPatientFields{
    "site", "patient.id", "patient.sex", "patient.age"};
constexpr std::array<std::string_view, 7> kImageFields{
    "site",           "image.sop_uid",    "image.lfn", "image.kind",
    "image.laterality", "image.study_date", "patient.id"};

void AppendSiteXml(std::string& out, const SiteResult& s) {
  out += "<site name=\"" + XmlEscape(s.site) + "\" status=\"";
  out += s.status == SiteStatus::kOk ? "ok" : "error";
  out += "\" elapsed-ms=\"" + std::to_string(s.elapsed_ms) + "\"";
  if (s.status == SiteStatus::kError) {
    out += " message=\"" + XmlEscape(s.message) + "\"/>";
    return;
  }
  if (s.rows.empty()) {
    out += "/>";
    return;
  }
  out += ">";
  for (const Row& row : s.rows) {
    out += "<row>";
    for (const auto& [name, value] : row) {
      out += "<f n=\"" + XmlEscape(name) + "\">" + XmlEscape(value) + "</f>";
    }
    out += "</row>";
  }
  out += "</site>";
}

// Minimal element tree for the subset the serializers emit.
struct XmlNode {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attrs;
  std::vector<XmlNode> children;
  std::string text;
  std::size_t pos = 0;

  std::optional<std::string> Attr(std::string_view key) const {
    for (const auto& [k, v] : attrs) {
      if (k == key) return v;
    }
    return std::nullopt;
  }
};

[[noreturn]] void XmlFail(std::size_t pos, std::string_view what) {
  throw Error(ErrorCode::kXmlSyntaxError,
              "at position " + std::to_string(pos) + ": " + std::string(what));
}

[[noreturn]] void SchemaFail(std::string_view what) {
  throw Error(ErrorCode::kSchemaError, std::string(what));
}

class XmlReader {
 public:
  explicit XmlReader(std::string_view s) : s_(s) {}

  XmlNode Document() {
    SkipSpace();
    XmlNode root = Element();
    SkipSpace();
    if (i_ != s_.size()) XmlFail(i_, "content after root element");
    return root;
  }

 private:
  static bool IsNameChar(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
           c == '_' || c == '.';
  }

  void SkipSpace() {
    while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\n' ||
                              s_[i_] == '\t' || s_[i_] == '\r')) {
      ++i_;
    }
  }

  void Expect(char c) {
    if (i_ >= s_.size() || s_[i_] != c) {
      XmlFail(i_, std::string("expected '") + c + "'");
    }
    ++i_;
  }

  std::string Name() {
    std::size_t start = i_;
    while (i_ < s_.size() && IsNameChar(s_[i_])) ++i_;
    if (start == i_) XmlFail(i_, "expected name");
    return std::string(s_.substr(start, i_ - start));
  }

  // Decodes the five predefined entities; anything else after '&' fails.
  std::string Decode(std::string_view raw, std::size_t base) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) {
      if (raw[k] == '<') XmlFail(base + k, "'<' in text");
      if (raw[k] != '&') {
        out.push_back(raw[k]);
        continue;
      }
      std::size_t semi = raw.find(';', k);
      if (semi == std::string_view::npos) XmlFail(base + k, "unterminated entity");
      std::string_view ent = raw.substr(k + 1, semi - k - 1);
      if (ent == "amp") out.push_back('&');
      else if (ent == "lt") out.push_back('<');
      else if (ent == "gt") out.push_back('>');
      else if (ent == "quot") out.push_back('"');
      else if (ent == "apos") out.push_back('\'');
      else XmlFail(base + k, "unknown entity");
      k = semi;
    }
    return out;
  }

  XmlNode Element() {
    XmlNode node;
    node.pos = i_;
    Expect('<');
    if (i_ < s_.size() && (s_[i_] == '!' || s_[i_] == '?' || s_[i_] == '/')) {
      XmlFail(i_, "unsupported markup");
    }
    node.name = Name();
    for (;;) {
      SkipSpace();
      if (i_ >= s_.size()) XmlFail(i_, "unterminated tag");
      if (s_[i_] == '/') {
        ++i_;
        Expect('>');
        return node;
      }
      if (s_[i_] == '>') {
        ++i_;
        break;
      }
      std::string key = Name();
      Expect('=');
      Expect('"');
      std::size_t end = s_.find('"', i_);
      if (end == std::string_view::npos) XmlFail(i_, "unterminated attribute");
      std::string value = Decode(s_.substr(i_, end - i_), i_);
      i_ = end + 1;
      if (node.Attr(key)) XmlFail(i_, "duplicate attribute " + key);
      node.attrs.emplace_back(std::move(key), std::move(value));
    }
    // Content: either child elements or text, then the closing tag.
    for (;;) {
      std::size_t text_start = i_;
      std::size_t lt = s_.find('<', i_);
      if (lt == std::string_view::npos) XmlFail(i_, "unterminated element");
      std::string_view raw = s_.substr(text_start, lt - text_start);
      i_ = lt;
      if (!raw.empty()) {
        bool blank = raw.find_first_not_of(" \t\r\n") == std::string_view::npos;
        if (!blank || node.children.empty()) {
          node.text += Decode(raw, text_start);
        }
      }
      if (s_.substr(i_, 2) == "</") {
        i_ += 2;
        std::string close = Name();
        if (close != node.name) XmlFail(i_, "mismatched </" + close + ">");
        SkipSpace();
        Expect('>');
        return node;
      }
      node.children.push_back(Element());
    }
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

bool IsBlank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

SiteResult SiteFromNode(const XmlNode& node) {
  if (node.name != "site") SchemaFail("expected <site>, got <" + node.name + ">");
  SiteResult s;
  auto name = node.Attr("name");
  auto status = node.Attr("status");
  auto elapsed = node.Attr("elapsed-ms");
  if (!name || !status || !elapsed) SchemaFail("site missing required attribute");
  s.site = *name;
  if (elapsed->empty() ||
      elapsed->find_first_not_of("0123456789") != std::string::npos ||
      elapsed->size() > 18) {
    SchemaFail("bad elapsed-ms '" + *elapsed + "'");
  }
  s.elapsed_ms = std::stoll(*elapsed);
  if (!IsBlank(node.text)) SchemaFail("text inside <site>");
  if (*status == "ok") {
    s.status = SiteStatus::kOk;
    if (node.Attr("message")) SchemaFail("ok site with message");
    for (const XmlNode& row_node : node.children) {
      if (row_node.name != "row") SchemaFail("expected <row>");
      if (!row_node.attrs.empty() || !IsBlank(row_node.text)) {
        SchemaFail("unexpected content in <row>");
      }
      Row row;
      std::set<std::string> seen;
      for (const XmlNode& f : row_node.children) {
        if (f.name != "f" || !f.children.empty()) SchemaFail("expected <f>");
        auto n = f.Attr("n");
        if (!n || f.attrs.size() != 1) SchemaFail("<f> requires exactly n=");
        if (!seen.insert(*n).second) SchemaFail("duplicate field " + *n);
        row.emplace_back(*n, f.text);
      }
      s.rows.push_back(std::move(row));
    }
  } else if (*status == "error") {
    s.status = SiteStatus::kError;
    auto message = node.Attr("message");
    if (!message) SchemaFail("error site without message");
    if (!node.children.empty()) SchemaFail("error site with rows");
    s.message = *message;
  } else {
    SchemaFail("bad status '" + *status + "'");
  }
  return s;
}

}  // namespace

std::span<const std::string_view> RowFields(Target target) {
  if (target == Target::kPatients) return kPatientFields;
  return kImageFields;
}

SiteResult SiteResult::Ok(std::string site, std::vector<Row> rows,
                          std::int64_t elapsed_ms) {
  return SiteResult{std::move(site), SiteStatus::kOk, std::move(rows), "",
                    elapsed_ms};
}

SiteResult SiteResult::Failed(std::string site, std::string message,
                              std::int64_t elapsed_ms) {
  return SiteResult{std::move(site), SiteStatus::kError, {}, std::move(message),
                    elapsed_ms};
}

std::size_t ResultSet::RowCount() const {
  std::size_t n = 0;
  for (const auto& s : sites) n += s.rows.size();
  return n;
}

std::size_t ResultSet::ErrorCount() const {
  std::size_t n = 0;
  for (const auto& s : sites) n += s.status == SiteStatus::kError ? 1 : 0;
  return n;
}

const SiteResult* ResultSet::FindSite(std::string_view name) const {
  for (const auto& s : sites) {
    if (s.site == name) return &s;
  }
  return nullptr;
}

std::string XmlEscape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string SerializeSiteResult(const SiteResult& s) {
  std::string out;
  AppendSiteXml(out, s);
  return out;
}

std::string SerializeResultSet(const ResultSet& r) {
  std::string out = "<resultset query-id=\"" + XmlEscape(r.query_id) + "\"";
  if (r.sites.empty()) return out + "/>";
  out += ">";
  for (const auto& s : r.sites) AppendSiteXml(out, s);
  out += "</resultset>";
  return out;
}

ResultSet ParseResultSet(std::string_view xml) {
  XmlNode root = XmlReader(xml).Document();
  if (root.name != "resultset") SchemaFail("root must be <resultset>");
  auto id = root.Attr("query-id");
  if (!id || root.attrs.size() != 1) SchemaFail("resultset requires query-id only");
  if (!IsHex16(*id)) SchemaFail("query-id must be 16 lowercase hex");
  if (!IsBlank(root.text)) SchemaFail("text inside <resultset>");
  ResultSet r;
  r.query_id = *id;
  std::set<std::string> names;
  for (const XmlNode& child : root.children) {
    SiteResult s = SiteFromNode(child);
    if (!names.insert(s.site).second) SchemaFail("duplicate site " + s.site);
    r.sites.push_back(std::move(s));
  }
  return r;
}

SiteResult ParseSiteResult(std::string_view xml) {
  return SiteFromNode(XmlReader(xml).Document());
}

ResultSet MergeResults(std::vector<SiteResult> parts, std::string query_id) {
  ResultSet r;
  r.query_id = std::move(query_id);
  std::set<std::string> names;
  for (auto& part : parts) {
    if (!names.insert(part.site).second) {
      throw Error(ErrorCode::kDuplicateSite, part.site);
    }
    r.sites.push_back(std::move(part));
  }
  return r;
}

}  // namespace mgvo
