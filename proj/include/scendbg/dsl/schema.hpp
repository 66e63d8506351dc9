#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "scendbg/dsl/ast.hpp"
#include "scendbg/value.hpp"

namespace scendbg::dsl {

enum class FeatureKind { Real, Integer, Categorical };

struct FeatureDescriptor {
  std::string name;
  FeatureKind kind = FeatureKind::Real;
  // numeric domain; [lo, hi) for reals sampled by uniform(), [lo, hi] for
  // integers, unbounded for computed fields and derived features
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool hi_exclusive = false;
  std::vector<std::string> categories;  // Categorical only
  bool derived = false;                 // distance / heading-difference features

  bool contains(const Value& v) const;
};

/// Ordered feature descriptors for a program: every param, then every
/// object's x, y, heading, model, colorR, colorG, colorB in declaration
/// order, then the derived dist/headingDiff features for non-ego objects.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<FeatureDescriptor> features, std::size_t declared_count);

  const std::vector<FeatureDescriptor>& features() const { return features_; }
  std::size_t size() const { return features_.size(); }
  std::size_t declared_count() const { return declared_count_; }
  const FeatureDescriptor& at(std::size_t i) const { return features_[i]; }

  /// Index of a feature by name; -1 if absent.
  int index_of(std::string_view name) const;
  bool has(std::string_view name) const { return index_of(name) >= 0; }

 private:
  std::vector<FeatureDescriptor> features_;
  std::size_t declared_count_ = 0;
  std::unordered_map<std::string, int> index_;
};

FeatureSchema feature_schema(const ScenarioProgram& program);

/// Schema name helpers.
std::string object_field_name(std::string_view object, std::string_view field);
std::string derived_dist_name(std::string_view ego, std::string_view other);
std::string derived_heading_diff_name(std::string_view ego, std::string_view other);

}  // namespace scendbg::dsl
