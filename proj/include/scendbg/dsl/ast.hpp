#pragma once

#include <array>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "scendbg/value.hpp"

namespace scendbg::dsl {

enum class DistKind { UniformReal, UniformInt, Categorical, Constant };

/// A primitive sampling distribution. `uniform(a,b)` draws reals from
/// [a, b); `range(a,b)` draws integers from [a, b] inclusive; `choice(...)`
/// draws uniformly from distinct strings; a bare literal is a constant.
struct Distribution {
  DistKind kind = DistKind::Constant;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::string> values;
  Value constant = 0.0;

  static Distribution uniform_real(double lo, double hi) {
    return {DistKind::UniformReal, lo, hi, {}, 0.0};
  }
  static Distribution uniform_int(double lo, double hi) {
    return {DistKind::UniformInt, lo, hi, {}, 0.0};
  }
  static Distribution categorical(std::vector<std::string> values) {
    return {DistKind::Categorical, 0.0, 0.0, std::move(values), 0.0};
  }
  static Distribution fixed(Value v) { return {DistKind::Constant, 0.0, 0.0, {}, std::move(v)}; }

  friend bool operator==(const Distribution&, const Distribution&) = default;
};

enum class BinOp { Add, Sub, Mul, Div, Lt, Le, Gt, Ge, Eq, Ne, And };
enum class Builtin { Dist, HeadingDiff, VisibleFrom };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct NumberLit {
  double value = 0.0;
};
struct StringLit {
  std::string value;
};
/// Reference to a sampled quantity by its schema name: a param ("time") or
/// an object field ("c0.heading").
struct FeatureRef {
  std::string name;
};
struct NegExpr {
  ExprPtr operand;
};
struct BinaryExpr {
  BinOp op;
  ExprPtr lhs;
  ExprPtr rhs;
};
/// dist/headingDiff/visibleFrom over two declared objects.
struct BuiltinCall {
  Builtin fn;
  std::string a;
  std::string b;
};
/// `expr in {"v1", "v2", ...}` over a categorical expression.
struct MembershipExpr {
  ExprPtr operand;
  std::vector<std::string> set;
};

struct Expr {
  std::variant<NumberLit, StringLit, FeatureRef, NegExpr, BinaryExpr, BuiltinCall, MembershipExpr>
      node;
};

bool structurally_equal(const Expr& a, const Expr& b);
inline bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return !a && !b;
  return structurally_equal(*a, *b);
}

/// An object field is either sampled from a distribution or computed from
/// earlier-declared features.
using FieldValue = std::variant<Distribution, ExprPtr>;

bool field_equal(const FieldValue& a, const FieldValue& b);

struct ParamDecl {
  std::string name;
  Distribution dist;
  friend bool operator==(const ParamDecl&, const ParamDecl&) = default;
};

struct ObjectDecl {
  std::string name;
  FieldValue x = Distribution::fixed(0.0);
  FieldValue y = Distribution::fixed(0.0);
  FieldValue heading = Distribution::fixed(0.0);
  Distribution model;
  std::array<Distribution, 3> color;
};

bool structurally_equal(const ObjectDecl& a, const ObjectDecl& b);

struct ScenarioProgram {
  std::vector<ParamDecl> params;
  std::vector<ObjectDecl> objects;  // first object is `ego`
  std::vector<ExprPtr> requires_;
  std::string source_text;

  const ObjectDecl* find_object(std::string_view name) const {
    for (const auto& o : objects)
      if (o.name == name) return &o;
    return nullptr;
  }
};

/// Structural equality over declarations and constraints; ignores sourceText.
bool structurally_equal(const ScenarioProgram& a, const ScenarioProgram& b);

inline ExprPtr make_expr(Expr e) { return std::make_shared<const Expr>(std::move(e)); }
inline ExprPtr number(double v) { return make_expr(Expr{NumberLit{v}}); }
inline ExprPtr string_lit(std::string v) { return make_expr(Expr{StringLit{std::move(v)}}); }
inline ExprPtr feature_ref(std::string name) { return make_expr(Expr{FeatureRef{std::move(name)}}); }
inline ExprPtr binary(BinOp op, ExprPtr l, ExprPtr r) {
  return make_expr(Expr{BinaryExpr{op, std::move(l), std::move(r)}});
}
inline ExprPtr builtin_call(Builtin fn, std::string a, std::string b) {
  return make_expr(Expr{BuiltinCall{fn, std::move(a), std::move(b)}});
}
inline ExprPtr membership(ExprPtr operand, std::vector<std::string> set) {
  return make_expr(Expr{MembershipExpr{std::move(operand), std::move(set)}});
}

}  // namespace scendbg::dsl
