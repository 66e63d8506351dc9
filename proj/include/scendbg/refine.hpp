#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scendbg/detector.hpp"
#include "scendbg/dsl/ast.hpp"
#include "scendbg/rules.hpp"
#include "scendbg/sampler.hpp"
#include "scendbg/world.hpp"

namespace scendbg::refine {

struct RefinedProgram {
  dsl::ScenarioProgram base;
  rules::Rule rule;
  dsl::ScenarioProgram spliced;
};

/// Appends one `require` per rule predicate to the program. Numeric ranges
/// become comparisons, memberships become `in {...}` requires, derived
/// features become builtin calls. Throws UnspliceableFeature when a predicate
/// references a quantity the program cannot express.
RefinedProgram splice(const dsl::ScenarioProgram& base, const rules::Rule& rule);

struct ValidationReport {
  int n_samples = 0;
  double incorrect_ratio = 0.0;
  double correct_ratio = 0.0;
  std::vector<double> cumulative;  // running incorrect ratio after each sample
  double baseline_incorrect_ratio = 0.0;
  double baseline_correct_ratio = 0.0;
  /// max |cumulative[i] - cumulative[last]| over the last 100 samples
  double stabilization_max_dev = 0.0;
};

struct ValidateOptions {
  int n_samples = 500;
  std::uint64_t seed = 0;
  double iou_threshold = 0.5;
  double f1_threshold = 0.8;
  int max_rejections_per_sample = 10000;
  world::CameraConfig camera;
  dsl::ViewConfig view;
};

/// Samples the spliced program on a fresh stream derived from (seed,
/// "validate"), runs realize -> detect -> evaluate, and accumulates the
/// cumulative incorrect ratio. The baseline runs identically on the base
/// program with the stream derived from (seed, "baseline").
ValidationReport validate(const RefinedProgram& refined, const detect::FaultModelConfig& detector,
                          const ValidateOptions& options);

/// Monte Carlo fraction of base-program samples matching the rule;
/// `stderr_out` receives sqrt(p(1-p)/n).
double feature_space_coverage(const dsl::ScenarioProgram& base, const rules::Rule& rule,
                              int n_mc, std::uint64_t seed, double* stderr_out = nullptr,
                              int max_rejections_per_sample = 10000);

nlohmann::ordered_json to_json(const ValidationReport& report);
std::string cumulative_csv(const ValidationReport& report);

}  // namespace scendbg::refine
