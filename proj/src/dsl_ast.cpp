#include "scendbg/dsl/ast.hpp"

namespace scendbg::dsl {

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& lhs) -> bool {
        using T = std::decay_t<decltype(lhs)>;
        const auto& rhs = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, NumberLit>) {
          return lhs.value == rhs.value;
        } else if constexpr (std::is_same_v<T, StringLit>) {
          return lhs.value == rhs.value;
        } else if constexpr (std::is_same_v<T, FeatureRef>) {
          return lhs.name == rhs.name;
        } else if constexpr (std::is_same_v<T, NegExpr>) {
          return structurally_equal(lhs.operand, rhs.operand);
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          return lhs.op == rhs.op && structurally_equal(lhs.lhs, rhs.lhs) &&
                 structurally_equal(lhs.rhs, rhs.rhs);
        } else if constexpr (std::is_same_v<T, BuiltinCall>) {
          return lhs.fn == rhs.fn && lhs.a == rhs.a && lhs.b == rhs.b;
        } else {
          return structurally_equal(lhs.operand, rhs.operand) && lhs.set == rhs.set;
        }
      },
      a.node);
}

bool field_equal(const FieldValue& a, const FieldValue& b) {
  if (a.index() != b.index()) return false;
  if (std::holds_alternative<Distribution>(a))
    return std::get<Distribution>(a) == std::get<Distribution>(b);
  return structurally_equal(std::get<ExprPtr>(a), std::get<ExprPtr>(b));
}

bool structurally_equal(const ObjectDecl& a, const ObjectDecl& b) {
  return a.name == b.name && field_equal(a.x, b.x) && field_equal(a.y, b.y) &&
         field_equal(a.heading, b.heading) && a.model == b.model && a.color == b.color;
}

bool structurally_equal(const ScenarioProgram& a, const ScenarioProgram& b) {
  if (a.params != b.params) return false;
  if (a.objects.size() != b.objects.size() || a.requires_.size() != b.requires_.size())
    return false;
  for (std::size_t i = 0; i < a.objects.size(); ++i)
    if (!structurally_equal(a.objects[i], b.objects[i])) return false;
  for (std::size_t i = 0; i < a.requires_.size(); ++i)
    if (!structurally_equal(a.requires_[i], b.requires_[i])) return false;
  return true;
}

}  // namespace scendbg::dsl
