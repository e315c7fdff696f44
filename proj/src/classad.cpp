// Copyright 2026 The minigrid Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "minigrid/classad.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>

#include <fmt/format.h>

#include "minigrid/error.hpp"
#include "minigrid/strings.hpp"

namespace minigrid::classad {

ExprPtr make_literal(Value v) { return std::make_shared<const Expr>(Expr{Expr::Literal{std::move(v)}}); }
ExprPtr make_ref(Scope scope, std::string name) {
  return std::make_shared<const Expr>(Expr{Expr::Ref{scope, std::move(name)}});
}
ExprPtr make_not(ExprPtr operand) { return std::make_shared<const Expr>(Expr{Expr::Not{std::move(operand)}}); }
ExprPtr make_and(ExprPtr lhs, ExprPtr rhs) {
  return std::make_shared<const Expr>(Expr{Expr::And{std::move(lhs), std::move(rhs)}});
}
ExprPtr make_or(ExprPtr lhs, ExprPtr rhs) {
  return std::make_shared<const Expr>(Expr{Expr::Or{std::move(lhs), std::move(rhs)}});
}
ExprPtr make_compare(CmpOp op, ExprPtr lhs, ExprPtr rhs) {
  return std::make_shared<const Expr>(Expr{Expr::Compare{op, std::move(lhs), std::move(rhs)}});
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

enum class Tok { End, Int, Real, String, Name, LParen, RParen, Not, AndAnd, OrOr, Cmp, Dot };

struct Token {
  Tok kind;
  std::string text;
  CmpOp op = CmpOp::Eq;
  std::size_t pos = 0;
};

[[noreturn]] void parse_fail(std::size_t pos, std::string_view what) {
  throw Error(Errc::ParseError, fmt::format("expression column {}: {}", pos + 1, what));
}

bool name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (digit(c) || (c == '-' && i + 1 < s.size() && (digit(s[i + 1]) || s[i + 1] == '.'))) {
      std::size_t j = i + 1;
      bool real = false;
      while (j < s.size() && digit(s[j])) ++j;
      if (j < s.size() && s[j] == '.') {
        real = true;
        ++j;
        while (j < s.size() && digit(s[j])) ++j;
      }
      if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && digit(s[k])) {
          real = true;
          j = k;
          while (j < s.size() && digit(s[j])) ++j;
        }
      }
      out.push_back({real ? Tok::Real : Tok::Int, std::string(s.substr(i, j - i)), CmpOp::Eq, start});
      i = j;
    } else if (c == '"') {
      std::string text;
      std::size_t j = i + 1;
      bool closed = false;
      while (j < s.size()) {
        if (s[j] == '\\' && j + 1 < s.size()) {
          text.push_back(s[j + 1]);
          j += 2;
        } else if (s[j] == '"') {
          closed = true;
          ++j;
          break;
        } else {
          text.push_back(s[j++]);
        }
      }
      if (!closed) parse_fail(start, "unterminated string");
      out.push_back({Tok::String, std::move(text), CmpOp::Eq, start});
      i = j;
    } else if (name_start(c)) {
      std::size_t j = i + 1;
      while (j < s.size() && name_char(s[j])) ++j;
      out.push_back({Tok::Name, std::string(s.substr(i, j - i)), CmpOp::Eq, start});
      i = j;
    } else if (c == '(') {
      out.push_back({Tok::LParen, "(", CmpOp::Eq, start});
      ++i;
    } else if (c == ')') {
      out.push_back({Tok::RParen, ")", CmpOp::Eq, start});
      ++i;
    } else if (c == '.') {
      out.push_back({Tok::Dot, ".", CmpOp::Eq, start});
      ++i;
    } else if (c == '&' && i + 1 < s.size() && s[i + 1] == '&') {
      out.push_back({Tok::AndAnd, "&&", CmpOp::Eq, start});
      i += 2;
    } else if (c == '|' && i + 1 < s.size() && s[i + 1] == '|') {
      out.push_back({Tok::OrOr, "||", CmpOp::Eq, start});
      i += 2;
    } else if (c == '=' && i + 1 < s.size() && s[i + 1] == '=') {
      out.push_back({Tok::Cmp, "==", CmpOp::Eq, start});
      i += 2;
    } else if (c == '!' && i + 1 < s.size() && s[i + 1] == '=') {
      out.push_back({Tok::Cmp, "!=", CmpOp::Ne, start});
      i += 2;
    } else if (c == '!') {
      out.push_back({Tok::Not, "!", CmpOp::Eq, start});
      ++i;
    } else if (c == '<' || c == '>') {
      const bool eq = i + 1 < s.size() && s[i + 1] == '=';
      const CmpOp op = c == '<' ? (eq ? CmpOp::Le : CmpOp::Lt) : (eq ? CmpOp::Ge : CmpOp::Gt);
      out.push_back({Tok::Cmp, std::string(s.substr(i, eq ? 2 : 1)), op, start});
      i += eq ? 2 : 1;
    } else {
      parse_fail(start, fmt::format("unexpected character '{}'", c));
    }
  }
  out.push_back({Tok::End, "", CmpOp::Eq, s.size()});
  return out;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  ExprPtr parse() {
    auto e = parse_or();
    if (peek().kind != Tok::End) parse_fail(peek().pos, "trailing input '" + peek().text + "'");
    return e;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }

  ExprPtr parse_or() {
    auto lhs = parse_and();
    while (peek().kind == Tok::OrOr) {
      next();
      lhs = make_or(lhs, parse_and());
    }
    return lhs;
  }

  ExprPtr parse_and() {
    auto lhs = parse_not();
    while (peek().kind == Tok::AndAnd) {
      next();
      lhs = make_and(lhs, parse_not());
    }
    return lhs;
  }

  ExprPtr parse_not() {
    if (peek().kind == Tok::Not) {
      next();
      return make_not(parse_not());
    }
    return parse_cmp();
  }

  ExprPtr parse_cmp() {
    auto lhs = parse_term();
    if (peek().kind == Tok::Cmp) {
      const CmpOp op = next().op;
      return make_compare(op, lhs, parse_term());
    }
    return lhs;
  }

  ExprPtr parse_term() {
    const Token& t = next();
    switch (t.kind) {
      case Tok::Int: {
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc{} || p != t.text.data() + t.text.size()) parse_fail(t.pos, "integer out of range");
        return make_literal(v);
      }
      case Tok::Real:
        return make_literal(std::stod(t.text));
      case Tok::String:
        return make_literal(t.text);
      case Tok::LParen: {
        auto e = parse_or();
        if (next().kind != Tok::RParen) parse_fail(t.pos, "missing ')'");
        return e;
      }
      case Tok::Name: {
        if (strings::iequals(t.text, "true")) return make_literal(true);
        if (strings::iequals(t.text, "false")) return make_literal(false);
        if (strings::iequals(t.text, "undefined")) return make_literal(Undefined{});
        const bool my = strings::iequals(t.text, "my");
        const bool target = strings::iequals(t.text, "target");
        if ((my || target) && peek().kind == Tok::Dot) {
          next();
          const Token& name = next();
          if (name.kind != Tok::Name) parse_fail(name.pos, "attribute name expected after scope");
          return make_ref(my ? Scope::My : Scope::Target, name.text);
        }
        return make_ref(Scope::Unscoped, t.text);
      }
      default:
        parse_fail(t.pos, t.kind == Tok::End ? "unexpected end of expression" : "unexpected '" + t.text + "'");
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

std::string_view op_text(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "==";
    case CmpOp::Ne: return "!=";
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
  }
  return "==";
}

std::string literal_text(const Value& v) {
  struct Visitor {
    std::string operator()(Undefined) const { return "UNDEFINED"; }
    std::string operator()(bool b) const { return b ? "TRUE" : "FALSE"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const {
      auto s = fmt::format("{}", d);
      if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
      return s;
    }
    std::string operator()(const std::string& s) const {
      std::string out = "\"";
      for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
      }
      out.push_back('"');
      return out;
    }
  };
  return std::visit(Visitor{}, v);
}

}  // namespace

ExprPtr parse_expr(std::string_view text) { return Parser(lex(text)).parse(); }

std::string unparse(const Expr& expr) {
  struct Visitor {
    std::string operator()(const Expr::Literal& l) const { return literal_text(l.value); }
    std::string operator()(const Expr::Ref& r) const {
      switch (r.scope) {
        case Scope::My: return "MY." + r.name;
        case Scope::Target: return "TARGET." + r.name;
        case Scope::Unscoped: break;
      }
      return r.name;
    }
    std::string operator()(const Expr::Not& n) const { return "!(" + unparse(*n.operand) + ")"; }
    std::string operator()(const Expr::And& a) const {
      return "(" + unparse(*a.lhs) + ") && (" + unparse(*a.rhs) + ")";
    }
    std::string operator()(const Expr::Or& o) const {
      return "(" + unparse(*o.lhs) + ") || (" + unparse(*o.rhs) + ")";
    }
    std::string operator()(const Expr::Compare& c) const {
      return "(" + unparse(*c.lhs) + ") " + std::string(op_text(c.op)) + " (" + unparse(*c.rhs) + ")";
    }
  };
  return std::visit(Visitor{}, expr.node);
}

// ---------------------------------------------------------------------------
// ClassAd

ClassAd& ClassAd::set(std::string_view name, AttrValue value) {
  for (auto& [key, existing] : attrs_) {
    if (strings::iequals(key, name)) {
      existing = std::move(value);
      return *this;
    }
  }
  attrs_.emplace_back(std::string(name), std::move(value));
  return *this;
}

ClassAd& ClassAd::set_expr(std::string_view name, std::string_view expr_text) {
  return set(name, parse_expr(expr_text));
}

const AttrValue* ClassAd::lookup(std::string_view name) const {
  for (const auto& [key, value] : attrs_) {
    if (strings::iequals(key, name)) return &value;
  }
  return nullptr;
}

std::optional<std::string> ClassAd::get_string(std::string_view name) const {
  const auto* v = lookup(name);
  if (v == nullptr) return std::nullopt;
  if (const auto* s = std::get_if<std::string>(v)) return *s;
  return std::nullopt;
}

std::vector<std::string> ClassAd::missing_required() const {
  static const std::vector<std::string> kMachine{"Name", "State", "Activity", "LoadAvg", "Memory"};
  static const std::vector<std::string> kJob{"Owner", "Cmd", "Requirements"};
  std::vector<std::string> missing;
  for (const auto& name : kind_ == AdKind::Machine ? kMachine : kJob) {
    if (!contains(name)) missing.push_back(name);
  }
  return missing;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

// Attributes currently being expanded; re-entering one is a cycle and
// evaluates to UNDEFINED.
using Stack = std::vector<const AttrValue*>;

struct Context {
  const ClassAd& my;
  const ClassAd& target;
  Stack& stack;
};

Value eval_in(const Expr& expr, const Context& ctx);

Value attribute_value(const ClassAd& owner, const ClassAd& other, std::string_view name, Stack& stack) {
  const AttrValue* attr = owner.lookup(name);
  if (attr == nullptr) return Undefined{};
  if (const auto* e = std::get_if<ExprPtr>(attr)) {
    if (!*e || std::find(stack.begin(), stack.end(), attr) != stack.end()) return Undefined{};
    stack.push_back(attr);
    Value v = eval_in(**e, Context{owner, other, stack});
    stack.pop_back();
    return v;
  }
  return std::visit(
      [](const auto& v) -> Value {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, ExprPtr>) {
          return Undefined{};
        } else {
          return v;
        }
      },
      *attr);
}

Value attribute_value(const ClassAd& owner, const ClassAd& other, std::string_view name) {
  Stack stack;
  return attribute_value(owner, other, name, stack);
}

bool is_number(const Value& v) {
  return std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v);
}

double as_double(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}

template <typename T>
Value apply_cmp(CmpOp op, const T& a, const T& b) {
  switch (op) {
    case CmpOp::Eq: return a == b;
    case CmpOp::Ne: return a != b;
    case CmpOp::Lt: return a < b;
    case CmpOp::Le: return a <= b;
    case CmpOp::Gt: return a > b;
    case CmpOp::Ge: return a >= b;
  }
  return Undefined{};
}

Value compare(CmpOp op, const Value& a, const Value& b) {
  if (is_undefined(a) || is_undefined(b)) return Undefined{};
  if (is_number(a) && is_number(b)) {
    if (std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b)) {
      return apply_cmp(op, std::get<std::int64_t>(a), std::get<std::int64_t>(b));
    }
    const double x = as_double(a);
    const double y = as_double(b);
    if (x != x || y != y) return Undefined{};
    return apply_cmp(op, x, y);
  }
  if (std::holds_alternative<std::string>(a) && std::holds_alternative<std::string>(b)) {
    return apply_cmp(op, strings::to_lower(std::get<std::string>(a)), strings::to_lower(std::get<std::string>(b)));
  }
  if (std::holds_alternative<bool>(a) && std::holds_alternative<bool>(b)) {
    if (op == CmpOp::Eq) return std::get<bool>(a) == std::get<bool>(b);
    if (op == CmpOp::Ne) return std::get<bool>(a) != std::get<bool>(b);
  }
  return Undefined{};
}

// Three-valued truth: 1 true, 0 false, -1 undefined (non-booleans included).
int truth(const Value& v) {
  if (const auto* b = std::get_if<bool>(&v)) return *b ? 1 : 0;
  return -1;
}

Value from_truth(int t) {
  if (t < 0) return Undefined{};
  return t == 1;
}

Value eval_in(const Expr& expr, const Context& ctx) {
  struct Visitor {
    const Context& ctx;
    Value operator()(const Expr::Literal& l) const { return l.value; }
    Value operator()(const Expr::Ref& r) const {
      switch (r.scope) {
        case Scope::My: return attribute_value(ctx.my, ctx.target, r.name, ctx.stack);
        case Scope::Target: return attribute_value(ctx.target, ctx.my, r.name, ctx.stack);
        case Scope::Unscoped:
          if (ctx.my.contains(r.name)) return attribute_value(ctx.my, ctx.target, r.name, ctx.stack);
          return attribute_value(ctx.target, ctx.my, r.name, ctx.stack);
      }
      return Undefined{};
    }
    Value operator()(const Expr::Not& n) const {
      const int t = truth(eval_in(*n.operand, ctx));
      return from_truth(t < 0 ? -1 : 1 - t);
    }
    Value operator()(const Expr::And& a) const {
      const int l = truth(eval_in(*a.lhs, ctx));
      if (l == 0) return false;
      const int r = truth(eval_in(*a.rhs, ctx));
      if (r == 0) return false;
      return from_truth(l == 1 && r == 1 ? 1 : -1);
    }
    Value operator()(const Expr::Or& o) const {
      const int l = truth(eval_in(*o.lhs, ctx));
      if (l == 1) return true;
      const int r = truth(eval_in(*o.rhs, ctx));
      if (r == 1) return true;
      return from_truth(l == 0 && r == 0 ? 0 : -1);
    }
    Value operator()(const Expr::Compare& c) const {
      return compare(c.op, eval_in(*c.lhs, ctx), eval_in(*c.rhs, ctx));
    }
  };
  return std::visit(Visitor{ctx}, expr.node);
}

}  // namespace

Value eval(const Expr& expr, const ClassAd& my, const ClassAd& target) {
  Stack stack;
  return eval_in(expr, Context{my, target, stack});
}

bool is_true(const Value& v) {
  const auto* b = std::get_if<bool>(&v);
  return b != nullptr && *b;
}

bool is_undefined(const Value& v) { return std::holds_alternative<Undefined>(v); }

std::string to_string(const Value& v) { return literal_text(v); }

bool matches(const ClassAd& job, const ClassAd& machine) {
  if (!is_true(attribute_value(job, machine, "Requirements"))) return false;
  if (!machine.contains("Requirements")) return true;
  return is_true(attribute_value(machine, job, "Requirements"));
}

std::vector<std::string> matchmake(const ClassAd& job, std::span<const ClassAd> machines) {
  struct Candidate {
    double rank;
    std::string name;
  };
  std::vector<Candidate> candidates;
  for (const auto& machine : machines) {
    const auto state = machine.get_string("State");
    const auto name = machine.get_string("Name");
    if (!state || !name || !strings::iequals(*state, "Unclaimed")) continue;
    if (!matches(job, machine)) continue;
    const Value rank = attribute_value(job, machine, "Rank");
    double r = 0.0;
    if (is_number(rank)) r = as_double(rank);
    if (r != r) r = 0.0;
    candidates.push_back({r, *name});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.rank != b.rank) return a.rank > b.rank;
    return a.name < b.name;
  });
  std::vector<std::string> out;
  for (auto& c : candidates) {
    if (std::find(out.begin(), out.end(), c.name) == out.end()) out.push_back(std::move(c.name));
  }
  return out;
}

}  // namespace minigrid::classad
