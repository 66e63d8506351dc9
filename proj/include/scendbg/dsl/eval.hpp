#pragma once

#include <span>

#include "scendbg/dsl/ast.hpp"
#include "scendbg/dsl/schema.hpp"

namespace scendbg::dsl {

/// View-cone parameters shared by the `visibleFrom` builtin and the world
/// model's visibility test.
struct ViewConfig {
  double half_angle_deg = 30.0;
  double max_range_m = 60.0;
};

/// Evaluates expressions against one (partial) assignment of declared
/// features. Values are indexed by schema position; builtins read object
/// poses straight from the assignment.
class EvalContext {
 public:
  EvalContext(const FeatureSchema& schema, std::span<const Value> values, ViewConfig view = {})
      : schema_(&schema), values_(values), view_(view) {}

  Value evaluate(const Expr& e) const;
  Value evaluate(const ExprPtr& e) const { return evaluate(*e); }
  double evaluate_number(const ExprPtr& e) const { return as_number(evaluate(*e)); }
  bool evaluate_bool(const ExprPtr& e) const;

  double object_number(std::string_view object, std::string_view field) const;

 private:
  Value builtin(const BuiltinCall& call) const;

  const FeatureSchema* schema_;
  std::span<const Value> values_;
  ViewConfig view_;
};

}  // namespace scendbg::dsl
