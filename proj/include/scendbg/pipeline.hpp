#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scendbg/anchors.hpp"
#include "scendbg/detector.hpp"
#include "scendbg/refine.hpp"
#include "scendbg/trees.hpp"
#include "scendbg/whitebox.hpp"
#include "scendbg/world.hpp"

namespace scendbg::pipeline {

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> methods = {"dt-bb", "dt-wb", "anchor-bb", "anchor-wb"};
  return methods;
}

struct PipelineConfig {
  std::string scenario_path;
  std::string detector_config_path;      // synthetic fault model, or
  std::string external_detections_path;  // replayed detector outputs
  int train_size = 950;
  int test_size = 950;
  int validate_size = 500;
  double f1_threshold = 0.8;
  double iou_threshold = 0.5;
  std::vector<std::string> methods = {"dt-bb", "anchor-bb"};
  std::uint64_t seed = 42;
  std::string output_dir;
  int jobs = 0;  // 0: min(8, hardware threads)
  bool dump_scenes = false;
  bool write_traces = false;
  int max_rejections = 10000;
  int forest_trees = 100;
  int coverage_samples = 10000;
  trees::TreeConfig tree;        // empty label_weights: balanced per dataset
  anchors::AnchorConfig anchor;  // seed is derived from the pipeline seed
  world::CameraConfig camera;

  void validate() const;  // throws ConfigError
};

PipelineConfig config_from_json(const nlohmann::json& j);

struct MethodTargetResult {
  std::string method;
  std::string target;  // "correct" | "incorrect"
  std::vector<rules::Rule> rules;  // measured on the test set
  std::optional<rules::Rule> best;
  std::optional<refine::RefinedProgram> refined;
  std::optional<refine::ValidationReport> validation;
  std::optional<double> feature_space_coverage;
  double coverage_stderr = 0.0;
  std::string note;  // set when a stage was skipped (no examples, no rules, ...)
};

struct PipelineReport {
  double train_incorrect_ratio = 0.0;
  double test_incorrect_ratio = 0.0;
  std::optional<whitebox::ActivationPattern> correct_pattern;
  std::optional<whitebox::ActivationPattern> incorrect_pattern;
  std::vector<MethodTargetResult> results;
  std::string output_dir;

  const MethodTargetResult* find(const std::string& method, const std::string& target) const {
    for (const auto& r : results)
      if (r.method == method && r.target == target) return &r;
    return nullptr;
  }
};

/// Full workflow: sample, realize, detect, evaluate, (augment), extract,
/// measure, select, splice, validate, coverage; writes every artifact under
/// cfg.output_dir. Byte-identical across runs for a fixed config.
PipelineReport run(const PipelineConfig& cfg);

}  // namespace scendbg::pipeline
