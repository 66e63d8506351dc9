#include "scendbg/dsl/eval.hpp"

#include <algorithm>

#include "scendbg/errors.hpp"
#include "scendbg/geometry.hpp"

namespace scendbg::dsl {

double EvalContext::object_number(std::string_view object, std::string_view field) const {
  int idx = schema_->index_of(object_field_name(object, field));
  if (idx < 0 || static_cast<std::size_t>(idx) >= values_.size())
    throw UnknownObject(std::string(object));
  return as_number(values_[static_cast<std::size_t>(idx)]);
}

Value EvalContext::builtin(const BuiltinCall& call) const {
  double ax = object_number(call.a, "x"), ay = object_number(call.a, "y");
  double bx = object_number(call.b, "x"), by = object_number(call.b, "y");
  switch (call.fn) {
    case Builtin::Dist: return geom::euclid(ax, ay, bx, by);
    case Builtin::HeadingDiff:
      return geom::heading_diff_deg(object_number(call.a, "heading"),
                                    object_number(call.b, "heading"));
    case Builtin::VisibleFrom: {
      double heading = object_number(call.a, "heading");
      bool visible = geom::in_view_cone(ax, ay, heading, bx, by, view_.half_angle_deg,
                                        view_.max_range_m);
      return visible ? 1.0 : 0.0;
    }
  }
  throw Error("unreachable builtin");
}

Value EvalContext::evaluate(const Expr& e) const {
  return std::visit(
      [&](const auto& node) -> Value {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, NumberLit>) {
          return node.value;
        } else if constexpr (std::is_same_v<T, StringLit>) {
          return node.value;
        } else if constexpr (std::is_same_v<T, FeatureRef>) {
          int idx = schema_->index_of(node.name);
          if (idx < 0 || static_cast<std::size_t>(idx) >= values_.size())
            throw UnknownFeature(node.name);
          return values_[static_cast<std::size_t>(idx)];
        } else if constexpr (std::is_same_v<T, NegExpr>) {
          return -as_number(evaluate(*node.operand));
        } else if constexpr (std::is_same_v<T, BuiltinCall>) {
          return builtin(node);
        } else if constexpr (std::is_same_v<T, MembershipExpr>) {
          const std::string& v = as_string(evaluate(*node.operand));
          bool found = std::find(node.set.begin(), node.set.end(), v) != node.set.end();
          return found ? 1.0 : 0.0;
        } else {  // BinaryExpr
          if (node.op == BinOp::And) {
            // short-circuit
            if (as_number(evaluate(*node.lhs)) == 0.0) return 0.0;
            return as_number(evaluate(*node.rhs)) != 0.0 ? 1.0 : 0.0;
          }
          Value lv = evaluate(*node.lhs);
          Value rv = evaluate(*node.rhs);
          if (node.op == BinOp::Eq || node.op == BinOp::Ne) {
            bool eq = is_number(lv) ? (is_number(rv) && as_number(lv) == as_number(rv))
                                    : (!is_number(rv) && as_string(lv) == as_string(rv));
            return (node.op == BinOp::Eq ? eq : !eq) ? 1.0 : 0.0;
          }
          double l = as_number(lv), r = as_number(rv);
          switch (node.op) {
            case BinOp::Add: return l + r;
            case BinOp::Sub: return l - r;
            case BinOp::Mul: return l * r;
            case BinOp::Div:
              if (r == 0.0) throw Error("division by zero while evaluating an expression");
              return l / r;
            case BinOp::Lt: return l < r ? 1.0 : 0.0;
            case BinOp::Le: return l <= r ? 1.0 : 0.0;
            case BinOp::Gt: return l > r ? 1.0 : 0.0;
            case BinOp::Ge: return l >= r ? 1.0 : 0.0;
            default: throw Error("unreachable operator");
          }
        }
      },
      e.node);
}

bool EvalContext::evaluate_bool(const ExprPtr& e) const {
  return as_number(evaluate(*e)) != 0.0;
}

}  // namespace scendbg::dsl
