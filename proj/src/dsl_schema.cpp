#include "scendbg/dsl/schema.hpp"

#include <algorithm>
#include <cmath>

namespace scendbg::dsl {

bool FeatureDescriptor::contains(const Value& v) const {
  if (kind == FeatureKind::Categorical) {
    if (is_number(v)) return false;
    return std::find(categories.begin(), categories.end(), as_string(v)) != categories.end();
  }
  if (!is_number(v)) return false;
  double x = as_number(v);
  if (kind == FeatureKind::Integer && x != std::floor(x)) return false;
  if (x < lo) return false;
  return hi_exclusive ? x < hi : x <= hi;
}

FeatureSchema::FeatureSchema(std::vector<FeatureDescriptor> features, std::size_t declared_count)
    : features_(std::move(features)), declared_count_(declared_count) {
  for (std::size_t i = 0; i < features_.size(); ++i)
    index_.emplace(features_[i].name, static_cast<int>(i));
}

int FeatureSchema::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? -1 : it->second;
}

std::string object_field_name(std::string_view object, std::string_view field) {
  return std::string(object) + "." + std::string(field);
}

std::string derived_dist_name(std::string_view ego, std::string_view other) {
  return "dist(" + std::string(ego) + "," + std::string(other) + ")";
}

std::string derived_heading_diff_name(std::string_view ego, std::string_view other) {
  return "headingDiff(" + std::string(ego) + "," + std::string(other) + ")";
}

namespace {

FeatureDescriptor from_distribution(std::string name, const Distribution& d) {
  FeatureDescriptor fd;
  fd.name = std::move(name);
  switch (d.kind) {
    case DistKind::UniformReal:
      fd.kind = FeatureKind::Real;
      fd.lo = d.lo;
      fd.hi = d.hi;
      fd.hi_exclusive = true;
      break;
    case DistKind::UniformInt:
      fd.kind = FeatureKind::Integer;
      fd.lo = d.lo;
      fd.hi = d.hi;
      break;
    case DistKind::Categorical:
      fd.kind = FeatureKind::Categorical;
      fd.categories = d.values;
      break;
    case DistKind::Constant:
      if (is_number(d.constant)) {
        fd.kind = FeatureKind::Real;
        fd.lo = fd.hi = as_number(d.constant);
      } else {
        fd.kind = FeatureKind::Categorical;
        fd.categories = {as_string(d.constant)};
      }
      break;
  }
  return fd;
}

FeatureDescriptor from_field(std::string name, const FieldValue& fv) {
  if (std::holds_alternative<Distribution>(fv))
    return from_distribution(std::move(name), std::get<Distribution>(fv));
  FeatureDescriptor fd;  // computed field: unbounded real
  fd.name = std::move(name);
  fd.kind = FeatureKind::Real;
  return fd;
}

}  // namespace

FeatureSchema feature_schema(const ScenarioProgram& program) {
  std::vector<FeatureDescriptor> out;
  for (const auto& p : program.params) out.push_back(from_distribution(p.name, p.dist));
  for (const auto& obj : program.objects) {
    out.push_back(from_field(object_field_name(obj.name, "x"), obj.x));
    out.push_back(from_field(object_field_name(obj.name, "y"), obj.y));
    out.push_back(from_field(object_field_name(obj.name, "heading"), obj.heading));
    out.push_back(from_distribution(object_field_name(obj.name, "model"), obj.model));
    static const char* channels[3] = {"colorR", "colorG", "colorB"};
    for (int c = 0; c < 3; ++c)
      out.push_back(from_distribution(object_field_name(obj.name, channels[c]), obj.color[c]));
  }
  std::size_t declared = out.size();
  const std::string& ego = program.objects.empty() ? "ego" : program.objects.front().name;
  for (std::size_t i = 1; i < program.objects.size(); ++i) {
    const std::string& other = program.objects[i].name;
    FeatureDescriptor dist;
    dist.name = derived_dist_name(ego, other);
    dist.kind = FeatureKind::Real;
    dist.lo = 0.0;
    dist.derived = true;
    out.push_back(std::move(dist));
    FeatureDescriptor hd;
    hd.name = derived_heading_diff_name(ego, other);
    hd.kind = FeatureKind::Real;
    hd.lo = 0.0;
    hd.hi = 180.0;
    hd.derived = true;
    out.push_back(std::move(hd));
  }
  return FeatureSchema(std::move(out), declared);
}

}  // namespace scendbg::dsl
