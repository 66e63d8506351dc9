#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "scendbg/dsl/schema.hpp"
#include "scendbg/evaluator.hpp"
#include "scendbg/value.hpp"

namespace scendbg::rules {

/// Numeric constraint lo (<|<=) x (<|<=) hi; either bound may be absent.
/// DT splits carry "<= c" / "> c" endpoints, anchors carry discretization
/// bins; both are preserved exactly through serialization.
struct NumericRange {
  std::optional<double> lo;
  bool lo_strict = false;
  std::optional<double> hi;
  bool hi_strict = false;
  friend bool operator==(const NumericRange&, const NumericRange&) = default;
};

struct Membership {
  std::vector<std::string> values;  // sorted, distinct
  friend bool operator==(const Membership&, const Membership&) = default;
};

struct Predicate {
  std::string feature;
  std::variant<NumericRange, Membership> constraint;
  friend bool operator==(const Predicate&, const Predicate&) = default;
};

struct Measurement {
  double precision = 0.0;
  double coverage = 0.0;
  int matched = 0;
  int matched_target = 0;
  int total = 0;
};

/// A conjunction of predicates over schema features with a target label.
/// Targets are the binary labels or the augmented sub-labels
/// (correct-dp, correct-unlabelled, ...).
struct Rule {
  std::vector<Predicate> predicates;
  std::string target = "incorrect";
  std::string provenance;  // "dt/bb", "dt/wb", "anchor/bb", "anchor/wb"
  std::optional<Measurement> measured;
};

Label binary_target(const Rule& rule);

/// True iff every predicate holds; an empty rule matches everything.
/// Throws UnknownFeature for unknown names or kind mismatch.
bool matches(const Rule& rule, const dsl::FeatureSchema& schema, const FeatureVector& f);

/// Merges per-feature constraints (at most one numeric range or membership
/// per feature) and orders predicates by schema position. Idempotent.
Rule normalized(Rule rule, const dsl::FeatureSchema& schema);

/// Coverage and precision against `target` over a dataset; zero matches
/// yield precision = coverage = 0.
Measurement measure(const Rule& rule, const dsl::FeatureSchema& schema,
                    std::span<const eval::LabeledExample> data, Label target);
Rule measured(Rule rule, const dsl::FeatureSchema& schema,
              std::span<const eval::LabeledExample> data);

/// Lexicographic max by (precision desc, coverage desc, predicate count asc),
/// final ties broken by canonical text. Throws EmptyRuleSet.
const Rule& select_best(std::span<const Rule> rules);

std::string to_text(const Rule& rule);

nlohmann::ordered_json to_json(const Rule& rule);
Rule rule_from_json(const nlohmann::json& j);

nlohmann::ordered_json predicates_to_json(std::span<const Predicate> predicates);
std::vector<Predicate> predicates_from_json(const nlohmann::json& j);

}  // namespace scendbg::rules
