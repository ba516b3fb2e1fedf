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

#include "mgvo/query.h"

#include <algorithm>
#include <cctype>
#include <utility>

#include "mgvo/date.h"
#include "mgvo/error.h"

namespace mgvo {
namespace {

constexpr std::array<std::string_view, 6> kAttrNames{
    "image.kind",  "image.laterality", "image.study_date",
    "patient.age", "patient.id",       "patient.sex"};

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool IsDigits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return c >= '0' && c <= '9';
  });
}

[[noreturn]] void Domain(Attr attr, std::string_view literal) {
  throw Error(ErrorCode::kDomainError,
              std::string(AttrName(attr)) + " does not accept '" +
                  std::string(literal) + "'");
}

// Validates one operand against the attribute's value domain and returns its
// normalized spelling.
std::string NormalizeOperand(Attr attr, std::string_view literal) {
  switch (attr) {
    case Attr::kPatientSex:
      if (literal != "F" && literal != "M") Domain(attr, literal);
      return std::string(literal);
    case Attr::kImageLaterality:
      if (literal != "L" && literal != "R") Domain(attr, literal);
      return std::string(literal);
    case Attr::kImageKind:
      if (literal != "ORIGINAL" && literal != "SMF") Domain(attr, literal);
      return std::string(literal);
    case Attr::kPatientId: {
      bool ok = !literal.empty() &&
                std::all_of(literal.begin(), literal.end(), [](char c) {
                  return std::isalnum(static_cast<unsigned char>(c)) ||
                         c == '.' || c == '_' || c == '-';
                });
      if (!ok) Domain(attr, literal);
      return std::string(literal);
    }
    case Attr::kPatientAge: {
      if (!IsDigits(literal) || literal.size() > 9) Domain(attr, literal);
      std::size_t first = literal.find_first_not_of('0');
      return first == std::string_view::npos ? "0"
                                             : std::string(literal.substr(first));
    }
    case Attr::kImageStudyDate:
      if (!Date::Parse(literal)) Domain(attr, literal);
      return std::string(literal);
  }
  Domain(attr, literal);
}

bool OperandLess(Attr attr, const std::string& a, const std::string& b) {
  if (attr == Attr::kPatientAge) return std::stol(a) < std::stol(b);
  return a < b;  // YYYYMMDD orders lexicographically
}

// --- lexer ---------------------------------------------------------------

enum class Tok { kWord, kNumber, kString, kEquals, kLocalMarker, kEnd };

struct Token {
  Tok kind;
  std::string text;
  std::size_t pos;
};

[[noreturn]] void Syntax(std::size_t pos, std::string_view what) {
  throw Error(ErrorCode::kSyntaxError,
              "at position " + std::to_string(pos) + ": " + std::string(what));
}

std::vector<Token> Lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '=') {
      out.push_back({Tok::kEquals, "=", i});
      ++i;
    } else if (c == '\'') {
      std::size_t end = s.find('\'', i + 1);
      if (end == std::string_view::npos) Syntax(i, "unterminated literal");
      out.push_back({Tok::kString, std::string(s.substr(i + 1, end - i - 1)), i});
      i = end + 1;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      out.push_back({Tok::kNumber, std::string(s.substr(i, j - i)), i});
      i = j;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) ||
                              s[j] == '_' || s[j] == '.')) {
        ++j;
      }
      out.push_back({Tok::kWord, std::string(s.substr(i, j - i)), i});
      i = j;
    } else if (s.substr(i, 2) == "/*") {
      std::size_t end = s.find("*/", i + 2);
      if (end == std::string_view::npos) Syntax(i, "unterminated comment");
      std::string body = Lower(s.substr(i + 2, end - i - 2));
      if (body != "local") Syntax(i, "unexpected comment");
      out.push_back({Tok::kLocalMarker, "/*LOCAL*/", i});
      i = end + 2;
    } else {
      Syntax(i, std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({Tok::kEnd, "", s.size()});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(Lex(text)) {}

  FormalQuery Parse() {
    FormalQuery q;
    ExpectKeyword("select");
    const Token& target = Next();
    std::string t = Lower(target.text);
    if (target.kind == Tok::kWord && t == "patients") {
      q.target = Target::kPatients;
    } else if (target.kind == Tok::kWord && t == "images") {
      q.target = Target::kImages;
    } else {
      Syntax(target.pos, "expected PATIENTS or IMAGES");
    }
    ExpectKeyword("where");
    q.conjuncts.push_back(Term(q));
    while (PeekKeyword("and")) {
      Next();
      q.conjuncts.push_back(Term(q));
    }
    if (Peek().kind == Tok::kLocalMarker) {
      Next();
      q.scope = Scope::kLocalOnly;
    }
    if (Peek().kind != Tok::kEnd) Syntax(Peek().pos, "trailing input");
    return Canonicalize(std::move(q));
  }

 private:
  Predicate Term(const FormalQuery& q) {
    const Token& name = Next();
    if (name.kind != Tok::kWord) Syntax(name.pos, "expected attribute");
    auto attr = AttrFromName(Lower(name.text));
    if (!attr) {
      throw Error(ErrorCode::kUnknownAttribute,
                  name.text + " at position " + std::to_string(name.pos));
    }
    if (q.Find(*attr) != nullptr) {
      throw Error(ErrorCode::kDuplicateAttribute, std::string(AttrName(*attr)));
    }
    Predicate p;
    p.attr = *attr;
    const Token& op = Next();
    if (op.kind == Tok::kEquals) {
      const Token& lit = Next();
      if (lit.kind != Tok::kString) Syntax(lit.pos, "expected quoted literal");
      p.op = Op::kEq;
      p.lo = lit.text;
    } else if (op.kind == Tok::kWord && Lower(op.text) == "between") {
      p.op = Op::kBetween;
      p.lo = Number();
      ExpectKeyword("and");
      p.hi = Number();
    } else {
      Syntax(op.pos, "expected = or BETWEEN");
    }
    return p;
  }

  std::string Number() {
    const Token& t = Next();
    if (t.kind != Tok::kNumber) Syntax(t.pos, "expected number");
    return t.text;
  }

  const Token& Peek() const { return toks_[i_]; }
  const Token& Next() {
    const Token& t = toks_[i_];
    if (t.kind != Tok::kEnd) ++i_;
    return t;
  }
  bool PeekKeyword(std::string_view kw) const {
    return Peek().kind == Tok::kWord && Lower(Peek().text) == kw;
  }
  void ExpectKeyword(std::string_view kw) {
    if (!PeekKeyword(kw)) {
      Syntax(Peek().pos, "expected " + Lower(kw));
    }
    Next();
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

}  // namespace

std::string_view AttrName(Attr attr) {
  return kAttrNames[static_cast<std::size_t>(attr)];
}

std::optional<Attr> AttrFromName(std::string_view name) {
  for (Attr a : kAllAttrs) {
    if (AttrName(a) == name) return a;
  }
  return std::nullopt;
}

bool IsImageAttr(Attr attr) {
  return attr == Attr::kImageKind || attr == Attr::kImageLaterality ||
         attr == Attr::kImageStudyDate;
}

bool IsRangeAttr(Attr attr) {
  return attr == Attr::kPatientAge || attr == Attr::kImageStudyDate;
}

std::string_view TargetName(Target target) {
  return target == Target::kPatients ? "PATIENTS" : "IMAGES";
}

const Predicate* FormalQuery::Find(Attr attr) const {
  for (const auto& p : conjuncts) {
    if (p.attr == attr) return &p;
  }
  return nullptr;
}

bool FormalQuery::operator==(const FormalQuery& other) const {
  if (target != other.target || scope != other.scope ||
      conjuncts.size() != other.conjuncts.size()) {
    return false;
  }
  auto by_attr = [](const Predicate& a, const Predicate& b) {
    return a.attr < b.attr;
  };
  auto mine = conjuncts;
  auto theirs = other.conjuncts;
  std::sort(mine.begin(), mine.end(), by_attr);
  std::sort(theirs.begin(), theirs.end(), by_attr);
  return mine == theirs;
}

FormalQuery Canonicalize(FormalQuery q) {
  if (q.conjuncts.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "query has no conjuncts");
  }
  std::sort(q.conjuncts.begin(), q.conjuncts.end(),
            [](const Predicate& a, const Predicate& b) { return a.attr < b.attr; });
  for (std::size_t i = 0; i < q.conjuncts.size(); ++i) {
    Predicate& p = q.conjuncts[i];
    if (i > 0 && q.conjuncts[i - 1].attr == p.attr) {
      throw Error(ErrorCode::kDuplicateAttribute, std::string(AttrName(p.attr)));
    }
    if (p.op == Op::kBetween && !IsRangeAttr(p.attr)) {
      throw Error(ErrorCode::kDomainError,
                  "BETWEEN not supported on " + std::string(AttrName(p.attr)));
    }
    p.lo = NormalizeOperand(p.attr, p.lo);
    if (p.op == Op::kBetween) {
      p.hi = NormalizeOperand(p.attr, p.hi);
      if (OperandLess(p.attr, p.hi, p.lo)) {
        throw Error(ErrorCode::kRangeInverted, p.lo + " > " + p.hi);
      }
    } else {
      p.hi.clear();
    }
  }
  return q;
}

FormalQuery ParseQuery(std::string_view text) { return Parser(text).Parse(); }

std::string SerializeQuery(const FormalQuery& q) {
  FormalQuery c = Canonicalize(q);
  std::string out = "SELECT ";
  out += TargetName(c.target);
  out += " WHERE ";
  for (std::size_t i = 0; i < c.conjuncts.size(); ++i) {
    const Predicate& p = c.conjuncts[i];
    if (i > 0) out += " AND ";
    out += AttrName(p.attr);
    if (p.op == Op::kEq) {
      out += " = '" + p.lo + "'";
    } else {
      out += " BETWEEN " + p.lo + " AND " + p.hi;
    }
  }
  if (c.scope == Scope::kLocalOnly) out += " /*LOCAL*/";
  return out;
}

}  // namespace mgvo
