#include "scendbg/rules.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "scendbg/dsl/parser.hpp"
#include "scendbg/errors.hpp"

namespace scendbg::rules {

Label binary_target(const Rule& rule) {
  const std::string& t = rule.target;
  if (t == "correct" || t.rfind("correct-", 0) == 0) return Label::Correct;
  if (t == "incorrect" || t.rfind("incorrect-", 0) == 0) return Label::Incorrect;
  throw Error("rule target has no binary projection: " + t);
}

namespace {

const dsl::FeatureDescriptor& descriptor_for(const Predicate& p,
                                             const dsl::FeatureSchema& schema) {
  int idx = schema.index_of(p.feature);
  if (idx < 0) throw UnknownFeature(p.feature);
  const auto& fd = schema.at(static_cast<std::size_t>(idx));
  bool numeric = std::holds_alternative<NumericRange>(p.constraint);
  if (numeric && fd.kind == dsl::FeatureKind::Categorical)
    throw UnknownFeature(p.feature + " is categorical, numeric predicate not applicable");
  if (!numeric && fd.kind != dsl::FeatureKind::Categorical)
    throw UnknownFeature(p.feature + " is numeric, membership predicate not applicable");
  return fd;
}

bool predicate_holds(const Predicate& p, const Value& v) {
  if (const auto* range = std::get_if<NumericRange>(&p.constraint)) {
    double x = as_number(v);
    if (range->lo && (x < *range->lo || (x == *range->lo && range->lo_strict))) return false;
    if (range->hi && (x > *range->hi || (x == *range->hi && range->hi_strict))) return false;
    return true;
  }
  const auto& member = std::get<Membership>(p.constraint);
  return !is_number(v) && std::find(member.values.begin(), member.values.end(), as_string(v)) !=
                              member.values.end();
}

}  // namespace

bool matches(const Rule& rule, const dsl::FeatureSchema& schema, const FeatureVector& f) {
  for (const auto& p : rule.predicates) {
    descriptor_for(p, schema);
    int idx = schema.index_of(p.feature);
    if (static_cast<std::size_t>(idx) >= f.values.size()) throw UnknownFeature(p.feature);
    if (!predicate_holds(p, f.values[static_cast<std::size_t>(idx)])) return false;
  }
  return true;
}

Rule normalized(Rule rule, const dsl::FeatureSchema& schema) {
  std::map<int, Predicate> merged;  // schema index -> combined predicate
  for (auto& p : rule.predicates) {
    descriptor_for(p, schema);
    int idx = schema.index_of(p.feature);
    auto it = merged.find(idx);
    if (it == merged.end()) {
      if (auto* member = std::get_if<Membership>(&p.constraint)) {
        std::sort(member->values.begin(), member->values.end());
        member->values.erase(std::unique(member->values.begin(), member->values.end()),
                             member->values.end());
      }
      merged.emplace(idx, std::move(p));
      continue;
    }
    Predicate& acc = it->second;
    if (auto* range = std::get_if<NumericRange>(&p.constraint)) {
      auto& dst = std::get<NumericRange>(acc.constraint);
      if (range->lo) {
        if (!dst.lo || *range->lo > *dst.lo) {
          dst.lo = range->lo;
          dst.lo_strict = range->lo_strict;
        } else if (*range->lo == *dst.lo) {
          dst.lo_strict = dst.lo_strict || range->lo_strict;
        }
      }
      if (range->hi) {
        if (!dst.hi || *range->hi < *dst.hi) {
          dst.hi = range->hi;
          dst.hi_strict = range->hi_strict;
        } else if (*range->hi == *dst.hi) {
          dst.hi_strict = dst.hi_strict || range->hi_strict;
        }
      }
    } else {
      auto& src = std::get<Membership>(p.constraint);
      auto& dst = std::get<Membership>(acc.constraint);
      std::sort(src.values.begin(), src.values.end());
      std::vector<std::string> inter;
      std::set_intersection(dst.values.begin(), dst.values.end(), src.values.begin(),
                            src.values.end(), std::back_inserter(inter));
      if (inter.empty())
        throw ValidationError("contradictory membership predicates on " + acc.feature);
      dst.values = std::move(inter);
    }
  }
  Rule out;
  out.target = std::move(rule.target);
  out.provenance = std::move(rule.provenance);
  out.measured = rule.measured;
  for (auto& [idx, p] : merged) out.predicates.push_back(std::move(p));
  return out;
}

Measurement measure(const Rule& rule, const dsl::FeatureSchema& schema,
                    std::span<const eval::LabeledExample> data, Label target) {
  Measurement m;
  m.total = static_cast<int>(data.size());
  for (const auto& ex : data) {
    if (!matches(rule, schema, ex.features)) continue;
    ++m.matched;
    if (ex.label() == target) ++m.matched_target;
  }
  if (m.total > 0) m.coverage = static_cast<double>(m.matched) / m.total;
  if (m.matched > 0) m.precision = static_cast<double>(m.matched_target) / m.matched;
  return m;
}

Rule measured(Rule rule, const dsl::FeatureSchema& schema,
              std::span<const eval::LabeledExample> data) {
  rule.measured = measure(rule, schema, data, binary_target(rule));
  return rule;
}

const Rule& select_best(std::span<const Rule> rules) {
  if (rules.empty()) throw EmptyRuleSet("no rules to select from");
  const Rule* best = nullptr;
  std::string best_text;
  for (const auto& r : rules) {
    if (!r.measured) throw Error("select_best requires measured rules");
    if (!best) {
      best = &r;
      best_text = to_text(r);
      continue;
    }
    const auto& a = *r.measured;
    const auto& b = *best->measured;
    std::string text = to_text(r);
    bool better = false;
    if (a.precision != b.precision) {
      better = a.precision > b.precision;
    } else if (a.coverage != b.coverage) {
      better = a.coverage > b.coverage;
    } else if (r.predicates.size() != best->predicates.size()) {
      better = r.predicates.size() < best->predicates.size();
    } else {
      better = text < best_text;
    }
    if (better) {
      best = &r;
      best_text = std::move(text);
    }
  }
  return *best;
}

std::string to_text(const Rule& rule) {
  if (rule.predicates.empty()) return "(always)";
  std::string out;
  for (std::size_t i = 0; i < rule.predicates.size(); ++i) {
    if (i) out += " ∧ ";
    const auto& p = rule.predicates[i];
    if (const auto* range = std::get_if<NumericRange>(&p.constraint)) {
      if (range->lo && range->hi) {
        out += dsl::format_number(*range->lo);
        out += range->lo_strict ? " < " : " <= ";
        out += p.feature;
        out += range->hi_strict ? " < " : " <= ";
        out += dsl::format_number(*range->hi);
      } else if (range->lo) {
        out += p.feature;
        out += range->lo_strict ? " > " : " >= ";
        out += dsl::format_number(*range->lo);
      } else if (range->hi) {
        out += p.feature;
        out += range->hi_strict ? " < " : " <= ";
        out += dsl::format_number(*range->hi);
      } else {
        out += p.feature + " : any";
      }
    } else {
      const auto& member = std::get<Membership>(p.constraint);
      out += p.feature;
      if (member.values.size() == 1) {
        out += " = " + member.values.front();
      } else {
        out += " in {";
        for (std::size_t k = 0; k < member.values.size(); ++k) {
          if (k) out += ", ";
          out += member.values[k];
        }
        out += "}";
      }
    }
  }
  return out;
}

nlohmann::ordered_json predicates_to_json(std::span<const Predicate> predicates) {
  auto preds = nlohmann::ordered_json::array();
  for (const auto& p : predicates) {
    nlohmann::ordered_json e;
    if (const auto* range = std::get_if<NumericRange>(&p.constraint)) {
      if (range->lo && range->hi) {
        e["op"] = "interval";
        e["feature"] = p.feature;
        e["lo"] = *range->lo;
        e["hi"] = *range->hi;
        e["loOpen"] = range->lo_strict;
        e["hiClosed"] = !range->hi_strict;
      } else if (range->lo) {
        e["op"] = range->lo_strict ? "gt" : "ge";
        e["feature"] = p.feature;
        e["value"] = *range->lo;
      } else if (range->hi) {
        e["op"] = range->hi_strict ? "lt" : "le";
        e["feature"] = p.feature;
        e["value"] = *range->hi;
      } else {
        e["op"] = "any";
        e["feature"] = p.feature;
      }
    } else {
      e["op"] = "in";
      e["feature"] = p.feature;
      e["values"] = std::get<Membership>(p.constraint).values;
    }
    preds.push_back(std::move(e));
  }
  return preds;
}

std::vector<Predicate> predicates_from_json(const nlohmann::json& j) {
  std::vector<Predicate> out;
  for (const auto& e : j) {
    Predicate p;
    p.feature = e.at("feature").get<std::string>();
    std::string op = e.at("op").get<std::string>();
    if (op == "in") {
      Membership m;
      m.values = e.at("values").get<std::vector<std::string>>();
      std::sort(m.values.begin(), m.values.end());
      p.constraint = std::move(m);
    } else {
      NumericRange r;
      if (op == "interval") {
        r.lo = e.at("lo").get<double>();
        r.hi = e.at("hi").get<double>();
        r.lo_strict = e.value("loOpen", true);
        r.hi_strict = !e.value("hiClosed", true);
      } else if (op == "ge" || op == "gt") {
        r.lo = e.at("value").get<double>();
        r.lo_strict = (op == "gt");
      } else if (op == "le" || op == "lt") {
        r.hi = e.at("value").get<double>();
        r.hi_strict = (op == "lt");
      } else if (op != "any") {
        throw Error("unknown predicate op: " + op);
      }
      p.constraint = r;
    }
    out.push_back(std::move(p));
  }
  return out;
}

nlohmann::ordered_json to_json(const Rule& rule) {
  nlohmann::ordered_json j;
  j["target"] = rule.target;
  j["predicates"] = predicates_to_json(rule.predicates);
  if (rule.measured) {
    j["precision"] = rule.measured->precision;
    j["coverage"] = rule.measured->coverage;
    j["matched"] = rule.measured->matched;
    j["matchedTarget"] = rule.measured->matched_target;
    j["total"] = rule.measured->total;
  }
  j["provenance"] = rule.provenance;
  j["text"] = to_text(rule);
  return j;
}

Rule rule_from_json(const nlohmann::json& j) {
  Rule rule;
  rule.target = j.at("target").get<std::string>();
  rule.provenance = j.value("provenance", std::string());
  rule.predicates = predicates_from_json(j.at("predicates"));
  if (j.contains("precision")) {
    Measurement m;
    m.precision = j.at("precision").get<double>();
    m.coverage = j.value("coverage", 0.0);
    m.matched = j.value("matched", 0);
    m.matched_target = j.value("matchedTarget", 0);
    m.total = j.value("total", 0);
    rule.measured = m;
  }
  return rule;
}

}  // namespace scendbg::rules
