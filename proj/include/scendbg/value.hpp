#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "scendbg/errors.hpp"

namespace scendbg {

/// A sampled feature value: numeric (reals and integers) or categorical.
using Value = std::variant<double, std::string>;

inline bool is_number(const Value& v) { return std::holds_alternative<double>(v); }

inline double as_number(const Value& v) {
  if (!is_number(v)) throw Error("expected a numeric value, got \"" + std::get<std::string>(v) + "\"");
  return std::get<double>(v);
}

inline const std::string& as_string(const Value& v) {
  if (is_number(v)) throw Error("expected a categorical value, got a number");
  return std::get<std::string>(v);
}

enum class Label { Correct, Incorrect };

/// Sub-classes after decision-pattern label augmentation.
enum class AugLabel { CorrectDP, CorrectUnlabelled, IncorrectDP, IncorrectUnlabelled };

inline const char* to_string(Label l) { return l == Label::Correct ? "correct" : "incorrect"; }

inline const char* to_string(AugLabel l) {
  switch (l) {
    case AugLabel::CorrectDP: return "correct-dp";
    case AugLabel::CorrectUnlabelled: return "correct-unlabelled";
    case AugLabel::IncorrectDP: return "incorrect-dp";
    case AugLabel::IncorrectUnlabelled: return "incorrect-unlabelled";
  }
  return "?";
}

inline Label parse_label(const std::string& s) {
  if (s == "correct") return Label::Correct;
  if (s == "incorrect") return Label::Incorrect;
  throw Error("unknown label: " + s);
}

inline Label binary_of(AugLabel l) {
  return (l == AugLabel::CorrectDP || l == AugLabel::CorrectUnlabelled) ? Label::Correct
                                                                        : Label::Incorrect;
}

/// One sampled assignment of every schema feature, in schema order.
/// Derived features (distances, heading differences) occupy the tail slots
/// once computed.
struct FeatureVector {
  std::vector<Value> values;
  std::int64_t seed_index = 0;
};

}  // namespace scendbg
