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

#pragma once

// Attribute advertisements and symmetric job/machine matchmaking.
//
// The expression language is a small subset of ClassAds:
//   expr := or;  or := and ("||" and)*;  and := not ("&&" not)*;
//   not  := "!" not | cmp;  cmp := term (op term)?;
//   term := INT | REAL | BOOL | STRING | ref | "(" expr ")";
//   ref  := ("MY." | "TARGET.")? NAME
// Evaluation is total and uses three-valued logic with UNDEFINED.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace minigrid::classad {

struct Undefined {
  bool operator==(const Undefined&) const = default;
};

/// Result of evaluating an expression.
using Value = std::variant<Undefined, bool, std::int64_t, double, std::string>;

enum class Scope { Unscoped, My, Target };
enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  struct Literal {
    Value value;
  };
  struct Ref {
    Scope scope;
    std::string name;
  };
  struct Not {
    ExprPtr operand;
  };
  struct And {
    ExprPtr lhs, rhs;
  };
  struct Or {
    ExprPtr lhs, rhs;
  };
  struct Compare {
    CmpOp op;
    ExprPtr lhs, rhs;
  };

  std::variant<Literal, Ref, Not, And, Or, Compare> node;
};

ExprPtr make_literal(Value v);
ExprPtr make_ref(Scope scope, std::string name);
ExprPtr make_not(ExprPtr operand);
ExprPtr make_and(ExprPtr lhs, ExprPtr rhs);
ExprPtr make_or(ExprPtr lhs, ExprPtr rhs);
ExprPtr make_compare(CmpOp op, ExprPtr lhs, ExprPtr rhs);

/// Throws Error(ParseError) on malformed input.
ExprPtr parse_expr(std::string_view text);
/// Fully parenthesized rendering; parse_expr(unparse(e)) evaluates like e.
std::string unparse(const Expr& expr);

using AttrValue = std::variant<std::int64_t, double, bool, std::string, ExprPtr>;

enum class AdKind { Job, Machine };

class ClassAd {
 public:
  explicit ClassAd(AdKind kind) : kind_(kind) {}

  AdKind kind() const { return kind_; }

  /// Inserts or replaces; names compare case-insensitively and keep the
  /// spelling of the first insertion.
  ClassAd& set(std::string_view name, AttrValue value);
  /// Parses `expr_text` and stores it as an expression attribute.
  ClassAd& set_expr(std::string_view name, std::string_view expr_text);

  const AttrValue* lookup(std::string_view name) const;
  bool contains(std::string_view name) const { return lookup(name) != nullptr; }
  const std::vector<std::pair<std::string, AttrValue>>& attributes() const { return attrs_; }

  /// Text value of a literal string attribute, if present.
  std::optional<std::string> get_string(std::string_view name) const;

  /// Names of mandatory attributes missing for this kind of ad.
  std::vector<std::string> missing_required() const;

 private:
  AdKind kind_;
  std::vector<std::pair<std::string, AttrValue>> attrs_;
};

/// Evaluates `expr` with MY bound to `my` and TARGET to `target`.
/// Unscoped references look in MY first, then TARGET.
Value eval(const Expr& expr, const ClassAd& my, const ClassAd& target);

bool is_true(const Value& v);
bool is_undefined(const Value& v);
std::string to_string(const Value& v);

/// Both Requirements hold: the job's against the machine and the machine's
/// (TRUE when absent) against the job. UNDEFINED never matches.
bool matches(const ClassAd& job, const ClassAd& machine);

/// Names of Unclaimed machines matching `job`, ordered by the job's Rank
/// (descending, non-numeric Rank counts as 0) and then Name ascending.
std::vector<std::string> matchmake(const ClassAd& job, std::span<const ClassAd> machines);

}  // namespace minigrid::classad
