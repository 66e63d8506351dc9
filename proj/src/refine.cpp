#include "scendbg/refine.hpp"

#include <algorithm>
#include <cmath>

#include "scendbg/dsl/parser.hpp"
#include "scendbg/errors.hpp"
#include "scendbg/evaluator.hpp"
#include "scendbg/rng.hpp"

namespace scendbg::refine {

namespace {

/// Maps a schema feature name to the expression that computes it.
dsl::ExprPtr feature_expr(const std::string& name, const dsl::ScenarioProgram& program) {
  auto paren = name.find('(');
  if (paren != std::string::npos) {
    // derived feature: dist(a,b) or headingDiff(a,b)
    std::string fn = name.substr(0, paren);
    if (name.back() != ')') throw UnspliceableFeature(name);
    std::string args = name.substr(paren + 1, name.size() - paren - 2);
    auto comma = args.find(',');
    if (comma == std::string::npos) throw UnspliceableFeature(name);
    std::string a = args.substr(0, comma);
    std::string b = args.substr(comma + 1);
    dsl::Builtin builtin;
    if (fn == "dist")
      builtin = dsl::Builtin::Dist;
    else if (fn == "headingDiff")
      builtin = dsl::Builtin::HeadingDiff;
    else
      throw UnspliceableFeature(name);
    if (!program.find_object(a) || !program.find_object(b)) throw UnspliceableFeature(name);
    return dsl::builtin_call(builtin, a, b);
  }

  auto dot = name.find('.');
  if (dot != std::string::npos) {
    if (!program.find_object(name.substr(0, dot))) throw UnspliceableFeature(name);
    return dsl::feature_ref(name);
  }
  for (const auto& p : program.params)
    if (p.name == name) return dsl::feature_ref(name);
  throw UnspliceableFeature(name);
}

dsl::ExprPtr predicate_require(const rules::Predicate& p, const dsl::ScenarioProgram& program) {
  dsl::ExprPtr feature = feature_expr(p.feature, program);
  if (const auto* range = std::get_if<rules::NumericRange>(&p.constraint)) {
    dsl::ExprPtr lo_expr, hi_expr;
    if (range->lo)
      lo_expr = dsl::binary(range->lo_strict ? dsl::BinOp::Gt : dsl::BinOp::Ge, feature,
                            dsl::number(*range->lo));
    if (range->hi)
      hi_expr = dsl::binary(range->hi_strict ? dsl::BinOp::Lt : dsl::BinOp::Le, feature,
                            dsl::number(*range->hi));
    if (lo_expr && hi_expr) return dsl::binary(dsl::BinOp::And, lo_expr, hi_expr);
    if (lo_expr) return lo_expr;
    if (hi_expr) return hi_expr;
    throw UnspliceableFeature(p.feature + " (vacuous predicate)");
  }
  const auto& member = std::get<rules::Membership>(p.constraint);
  return dsl::membership(feature, member.values);
}

}  // namespace

RefinedProgram splice(const dsl::ScenarioProgram& base, const rules::Rule& rule) {
  RefinedProgram out;
  out.base = base;
  out.rule = rule;
  out.spliced = base;
  for (const auto& p : rule.predicates)
    out.spliced.requires_.push_back(predicate_require(p, base));
  out.spliced.source_text = dsl::emit(out.spliced);
  dsl::validate(out.spliced);
  return out;
}

namespace {

struct RatioSeries {
  double ratio = 0.0;
  std::vector<double> cumulative;
};

RatioSeries incorrect_series(const dsl::ScenarioProgram& program,
                             const detect::FaultModelConfig& detector,
                             const ValidateOptions& options, std::uint64_t sampler_seed) {
  sample::SamplerConfig scfg;
  scfg.seed = sampler_seed;
  scfg.max_rejections_per_sample = options.max_rejections_per_sample;
  scfg.view = options.view;
  sample::ProgramSampler sampler(program, scfg);
  const auto& schema = sampler.schema();

  RatioSeries out;
  out.cumulative.reserve(static_cast<std::size_t>(options.n_samples));
  int incorrect = 0;
  for (int i = 0; i < options.n_samples; ++i) {
    FeatureVector f = sampler.sample_at(i);
    world::Scene scene = world::realize(program, schema, f, options.camera);
    detect::DetectorOutput det = detect::detect(scene, f, detector, schema);
    eval::ImageEvaluation ev =
        eval::evaluate_image(world::ground_truth_boxes(scene), det.detections,
                             options.iou_threshold, options.f1_threshold);
    if (ev.label == Label::Incorrect) ++incorrect;
    out.cumulative.push_back(static_cast<double>(incorrect) / (i + 1));
  }
  out.ratio = options.n_samples > 0 ? out.cumulative.back() : 0.0;
  return out;
}

}  // namespace

ValidationReport validate(const RefinedProgram& refined, const detect::FaultModelConfig& detector,
                          const ValidateOptions& options) {
  if (options.n_samples < 1) throw ConfigError("validation needs at least one sample");
  ValidationReport report;
  report.n_samples = options.n_samples;

  RatioSeries spliced = incorrect_series(refined.spliced, detector, options,
                                         RngStream(options.seed).derive("validate"));
  report.incorrect_ratio = spliced.ratio;
  report.correct_ratio = 1.0 - spliced.ratio;
  report.cumulative = std::move(spliced.cumulative);

  RatioSeries base = incorrect_series(refined.base, detector, options,
                                      RngStream(options.seed).derive("baseline"));
  report.baseline_incorrect_ratio = base.ratio;
  report.baseline_correct_ratio = 1.0 - base.ratio;

  double last = report.cumulative.back();
  std::size_t window = std::min<std::size_t>(100, report.cumulative.size());
  for (std::size_t i = report.cumulative.size() - window; i < report.cumulative.size(); ++i)
    report.stabilization_max_dev =
        std::max(report.stabilization_max_dev, std::fabs(report.cumulative[i] - last));
  return report;
}

double feature_space_coverage(const dsl::ScenarioProgram& base, const rules::Rule& rule,
                              int n_mc, std::uint64_t seed, double* stderr_out,
                              int max_rejections_per_sample) {
  if (n_mc < 1) throw ConfigError("coverage estimation needs at least one sample");
  sample::SamplerConfig scfg;
  scfg.seed = RngStream(seed).derive("coverage");
  scfg.max_rejections_per_sample = max_rejections_per_sample;
  sample::ProgramSampler sampler(base, scfg);
  int matched = 0;
  for (int i = 0; i < n_mc; ++i) {
    if (rules::matches(rule, sampler.schema(), sampler.sample_at(i))) ++matched;
  }
  double p = static_cast<double>(matched) / n_mc;
  if (stderr_out) *stderr_out = std::sqrt(p * (1.0 - p) / n_mc);
  return p;
}

nlohmann::ordered_json to_json(const ValidationReport& report) {
  nlohmann::ordered_json j;
  j["nSamples"] = report.n_samples;
  j["incorrectRatio"] = report.incorrect_ratio;
  j["correctRatio"] = report.correct_ratio;
  j["baselineIncorrectRatio"] = report.baseline_incorrect_ratio;
  j["baselineCorrectRatio"] = report.baseline_correct_ratio;
  j["stabilizationMaxDev"] = report.stabilization_max_dev;
  j["cumulative"] = report.cumulative;
  return j;
}

std::string cumulative_csv(const ValidationReport& report) {
  std::string out = "sampleIndex,cumulativeIncorrectRatio\n";
  for (std::size_t i = 0; i < report.cumulative.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += dsl::format_number(report.cumulative[i]);
    out += '\n';
  }
  return out;
}

}  // namespace scendbg::refine
