#include "scendbg/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>

#include "scendbg/dsl/parser.hpp"
#include "scendbg/errors.hpp"
#include "scendbg/evaluator.hpp"
#include "scendbg/io.hpp"
#include "scendbg/rng.hpp"
#include "scendbg/sampler.hpp"

namespace scendbg::pipeline {

namespace fs = std::filesystem;

void PipelineConfig::validate() const {
  if (scenario_path.empty()) throw ConfigError("a scenario path is required");
  if (detector_config_path.empty() == external_detections_path.empty())
    throw ConfigError("exactly one of detector_config / external_detections is required");
  if (train_size < 1 || test_size < 1 || validate_size < 1)
    throw ConfigError("train/test/validate sizes must be >= 1");
  if (methods.empty()) throw ConfigError("at least one extraction method is required");
  for (const auto& m : methods) {
    if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
      throw ConfigError("unknown method: " + m);
  }
  if (output_dir.empty()) throw ConfigError("an output directory is required");
  if (f1_threshold < 0.0 || f1_threshold > 1.0 || iou_threshold < 0.0 || iou_threshold > 1.0)
    throw ConfigError("thresholds must be in [0, 1]");
}

PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  cfg.scenario_path = j.value("scenario", std::string());
  cfg.detector_config_path = j.value("detector_config", std::string());
  cfg.external_detections_path = j.value("external_detections", std::string());
  cfg.train_size = j.value("train_size", 950);
  cfg.test_size = j.value("test_size", 950);
  cfg.validate_size = j.value("validate_size", 500);
  cfg.f1_threshold = j.value("f1_threshold", 0.8);
  cfg.iou_threshold = j.value("iou_threshold", 0.5);
  if (j.contains("methods")) cfg.methods = j.at("methods").get<std::vector<std::string>>();
  cfg.seed = j.value("seed", 42ULL);
  cfg.output_dir = j.value("output_dir", std::string());
  cfg.jobs = j.value("jobs", 0);
  cfg.dump_scenes = j.value("dump_scenes", false);
  cfg.write_traces = j.value("write_traces", false);
  cfg.max_rejections = j.value("max_rejections", 10000);
  cfg.forest_trees = j.value("forest_trees", 100);
  cfg.coverage_samples = j.value("coverage_samples", 10000);
  if (j.contains("tree")) {
    const auto& t = j.at("tree");
    cfg.tree.min_split = t.value("min_split", 20.0);
    cfg.tree.min_bucket = t.value("min_bucket", 7.0);
    cfg.tree.complexity_penalty = t.value("complexity_penalty", 0.01);
    cfg.tree.max_depth = t.value("max_depth", 30);
    if (t.contains("label_weights"))
      for (const auto& [k, v] : t.at("label_weights").items())
        cfg.tree.label_weights[k] = v.get<double>();
  }
  if (j.contains("anchor")) {
    const auto& a = j.at("anchor");
    cfg.anchor.precision_threshold = a.value("precision_threshold", 0.95);
    cfg.anchor.delta = a.value("delta", 0.05);
    cfg.anchor.tolerance = a.value("tolerance", 0.1);
    cfg.anchor.beam_width = a.value("beam_width", 10);
    cfg.anchor.batch_size = a.value("batch_size", 32);
    cfg.anchor.max_anchor_size = a.value("max_anchor_size", 0);
    cfg.anchor.max_covered_per_label = a.value("max_covered_per_label", 50);
    cfg.anchor.discretization_bins = a.value("discretization_bins", 4);
    cfg.anchor.max_samples_per_arm = a.value("max_samples_per_arm", 10000);
    cfg.anchor.max_total_samples = a.value("max_total_samples", 500000);
  }
  if (j.contains("camera")) {
    const auto& c = j.at("camera");
    cfg.camera.view_half_angle_deg = c.value("view_half_angle_deg", 30.0);
    cfg.camera.max_range_m = c.value("max_range_m", 60.0);
    cfg.camera.image_width = c.value("image_width", 1920.0);
    cfg.camera.image_height = c.value("image_height", 1200.0);
    cfg.camera.height_m = c.value("height_m", 1.4);
  }
  return cfg;
}

namespace {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 0)
    jobs = static_cast<int>(std::min<unsigned>(8, std::max(1u, std::thread::hardware_concurrency())));
  if (jobs == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

nlohmann::ordered_json example_to_json(const eval::LabeledExample& ex,
                                       const dsl::FeatureSchema& schema) {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const Value& v = ex.features.values[i];
    if (is_number(v))
      j[schema.at(i).name] = as_number(v);
    else
      j[schema.at(i).name] = as_string(v);
  }
  j["_seedIndex"] = ex.features.seed_index;
  j["tp"] = ex.evaluation.tp;
  j["fp"] = ex.evaluation.fp;
  j["fn"] = ex.evaluation.fn;
  j["precision"] = ex.evaluation.precision;
  j["recall"] = ex.evaluation.recall;
  j["f1"] = ex.evaluation.f1;
  j["label"] = to_string(ex.evaluation.label);
  if (ex.activations) j["activations"] = *ex.activations;
  if (ex.augmented) j["_augLabel"] = to_string(*ex.augmented);
  return j;
}

nlohmann::ordered_json scene_to_json(const world::Scene& scene, std::int64_t seed_index) {
  nlohmann::ordered_json j;
  j["_seedIndex"] = seed_index;
  j["camera"] = {{"x", scene.camera.x},
                 {"y", scene.camera.y},
                 {"heading", scene.camera.heading_deg}};
  auto cars = nlohmann::ordered_json::array();
  for (const auto& car : scene.cars) {
    cars.push_back({{"name", car.name},
                    {"x", car.x},
                    {"y", car.y},
                    {"heading", car.heading_deg},
                    {"model", car.model},
                    {"color", car.color}});
  }
  j["cars"] = std::move(cars);
  return j;
}

double incorrect_ratio(std::span<const eval::LabeledExample> data) {
  if (data.empty()) return 0.0;
  int incorrect = 0;
  for (const auto& ex : data)
    if (ex.label() == Label::Incorrect) ++incorrect;
  return static_cast<double>(incorrect) / static_cast<double>(data.size());
}

bool is_whitebox(const std::string& method) {
  return method.size() > 3 && method.compare(method.size() - 3, 3, "-wb") == 0;
}

struct MethodRules {
  // per binary target, the unmeasured extracted rules
  std::vector<rules::Rule> correct;
  std::vector<rules::Rule> incorrect;
};

}  // namespace

PipelineReport run(const PipelineConfig& cfg) {
  cfg.validate();
  PipelineReport report;
  report.output_dir = cfg.output_dir;
  fs::create_directories(cfg.output_dir);
  auto out_path = [&](const std::string& name) {
    return (fs::path(cfg.output_dir) / name).string();
  };

  dsl::ScenarioProgram program = dsl::parse(io::read_file(cfg.scenario_path));

  std::optional<detect::FaultModelConfig> fault;
  std::unique_ptr<detect::Detector> detector;
  sample::SamplerConfig sampler_cfg;
  sampler_cfg.seed = RngStream(cfg.seed).derive("sample");
  sampler_cfg.max_rejections_per_sample = cfg.max_rejections;
  sampler_cfg.view = {cfg.camera.view_half_angle_deg, cfg.camera.max_range_m};
  sample::ProgramSampler sampler(program, sampler_cfg);
  const dsl::FeatureSchema& schema = sampler.schema();

  if (!cfg.detector_config_path.empty()) {
    fault = detect::load_fault_model(cfg.detector_config_path);
    detector = std::make_unique<detect::SyntheticDetector>(*fault, schema);
  } else {
    detector = std::make_unique<detect::ExternalDetector>(
        detect::load_external_detections(cfg.external_detections_path));
  }

  // one generation pass; the first train_size samples train, the rest test
  auto total = static_cast<std::size_t>(cfg.train_size + cfg.test_size);
  std::vector<eval::LabeledExample> examples(total);
  std::vector<nlohmann::ordered_json> scene_dumps(cfg.dump_scenes ? total : 0);
  parallel_for(total, cfg.jobs, [&](std::size_t i) {
    FeatureVector f = sampler.sample_at(static_cast<std::int64_t>(i));
    world::Scene scene = world::realize(program, schema, f, cfg.camera);
    detect::DetectorOutput out = detector->run(scene, f);
    eval::LabeledExample ex;
    ex.evaluation = eval::evaluate_image(world::ground_truth_boxes(scene), out.detections,
                                         cfg.iou_threshold, cfg.f1_threshold);
    ex.features = std::move(f);
    ex.activations = std::move(out.activations);
    if (cfg.dump_scenes) scene_dumps[i] = scene_to_json(scene, ex.features.seed_index);
    examples[i] = std::move(ex);
  });

  auto train = std::span<eval::LabeledExample>(examples).first(static_cast<std::size_t>(cfg.train_size));
  auto test = std::span<eval::LabeledExample>(examples).subspan(static_cast<std::size_t>(cfg.train_size));
  report.train_incorrect_ratio = incorrect_ratio(train);
  report.test_incorrect_ratio = incorrect_ratio(test);

  // white-box label augmentation
  bool wb_requested = std::any_of(cfg.methods.begin(), cfg.methods.end(), is_whitebox);
  if (wb_requested) {
    for (const auto& ex : examples)
      if (!ex.activations)
        throw MethodError("a white-box method was requested but the detector "
                          "provides no activations");
    trees::TreeConfig pattern_cfg = cfg.tree;
    if (pattern_cfg.label_weights.empty()) {
      trees::Dataset probe = trees::build_dataset(schema, train, false);
      pattern_cfg.label_weights = trees::balanced_label_weights(probe);
    }
    std::uint64_t wb_seed = RngStream(cfg.seed).derive("whitebox");
    report.correct_pattern = whitebox::mine_pattern(train, Label::Correct, pattern_cfg, wb_seed);
    report.incorrect_pattern =
        whitebox::mine_pattern(train, Label::Incorrect, pattern_cfg, wb_seed);
    whitebox::augment_labels(std::span<eval::LabeledExample>(examples), *report.correct_pattern,
                             *report.incorrect_pattern);
  }

  {
    std::vector<nlohmann::ordered_json> lines;
    lines.reserve(train.size());
    for (const auto& ex : train) lines.push_back(example_to_json(ex, schema));
    io::write_jsonl(out_path("labels_train.jsonl"), lines);
    lines.clear();
    for (const auto& ex : test) lines.push_back(example_to_json(ex, schema));
    io::write_jsonl(out_path("labels_test.jsonl"), lines);
  }
  if (cfg.dump_scenes) io::write_jsonl(out_path("scenes.jsonl"), scene_dumps);

  // rule extraction per method
  std::optional<anchors::Discretizer> discretizer;
  auto ensure_discretizer = [&]() -> const anchors::Discretizer& {
    if (!discretizer)
      discretizer.emplace(schema, std::span<const eval::LabeledExample>(train),
                          cfg.anchor.discretization_bins);
    return *discretizer;
  };

  auto tree_config_for = [&](const trees::Dataset& data) {
    trees::TreeConfig t = cfg.tree;
    if (t.label_weights.empty()) t.label_weights = trees::balanced_label_weights(data);
    return t;
  };

  auto run_anchor_extraction = [&](const std::string& method, const trees::Dataset& data,
                                   bool augmented, MethodRules& out) {
    trees::ForestConfig fcfg;
    fcfg.num_trees = cfg.forest_trees;
    fcfg.tree = tree_config_for(data);
    trees::RandomForest forest =
        trees::fit_forest(data, fcfg, RngStream(cfg.seed).derive("forest/" + method));
    trees::Encoder encoder(schema);
    anchors::SurrogateFn surrogate = [&forest, &encoder](const FeatureVector& f) {
      return trees::predict_class(forest, encoder.encode(f));
    };

    std::vector<std::string> label_names;
    if (augmented)
      label_names = {"correct-dp", "correct-unlabelled", "incorrect-dp", "incorrect-unlabelled"};
    else
      label_names = {"correct", "incorrect"};

    std::vector<anchors::AnchorTrace> traces;
    for (std::size_t cls = 0; cls < label_names.size(); ++cls) {
      anchors::AnchorConfig acfg = cfg.anchor;
      acfg.seed = RngStream(cfg.seed).derive(method + "/" + label_names[cls]);
      auto rules_for_label = anchors::extract_anchor_rules(
          train, label_names[cls], augmented, static_cast<int>(cls), surrogate, sampler,
          ensure_discretizer(), acfg, cfg.write_traces ? &traces : nullptr);
      bool correct_side = label_names[cls].rfind("correct", 0) == 0;
      auto& bucket = correct_side ? out.correct : out.incorrect;
      for (auto& r : rules_for_label) bucket.push_back(std::move(r));
    }
    if (cfg.write_traces) {
      std::vector<nlohmann::ordered_json> lines;
      for (const auto& t : traces) lines.push_back(anchors::to_json(t));
      io::write_jsonl(out_path("anchor_traces_" + method + ".jsonl"), lines);
    }
  };

  auto run_tree_extraction = [&](const std::string& method, const trees::Dataset& data,
                                 bool augmented, MethodRules& out) {
    trees::DecisionTree tree =
        trees::fit_tree(data, tree_config_for(data), RngStream(cfg.seed).derive(method));
    io::write_file(out_path("tree_" + method + ".json"), trees::to_json(tree).dump(2) + "\n");
    std::vector<std::string> label_names =
        augmented ? std::vector<std::string>{"correct-dp", "correct-unlabelled", "incorrect-dp",
                                             "incorrect-unlabelled"}
                  : std::vector<std::string>{"correct", "incorrect"};
    for (const auto& name : label_names) {
      auto extracted = trees::extract_rules(tree, data, name);
      bool correct_side = name.rfind("correct", 0) == 0;
      auto& bucket = correct_side ? out.correct : out.incorrect;
      for (auto& r : extracted) bucket.push_back(std::move(r));
    }
  };

  for (const std::string& method : known_methods()) {
    if (std::find(cfg.methods.begin(), cfg.methods.end(), method) == cfg.methods.end()) continue;
    bool augmented = is_whitebox(method);

    MethodRules extracted;
    trees::Dataset data = trees::build_dataset(schema, train, augmented);
    if (method.rfind("dt", 0) == 0)
      run_tree_extraction(method, data, augmented, extracted);
    else
      run_anchor_extraction(method, data, augmented, extracted);

    for (const std::string& target : {std::string("correct"), std::string("incorrect")}) {
      Label binary = parse_label(target);
      MethodTargetResult result;
      result.method = method;
      result.target = target;

      auto& bucket = target == "correct" ? extracted.correct : extracted.incorrect;
      for (auto& r : bucket) {
        r.provenance = (method.rfind("dt", 0) == 0 ? "dt/" : "anchor/") +
                       std::string(augmented ? "wb" : "bb");
        rules::Rule normalized = rules::normalized(r, schema);
        normalized.measured = rules::measure(normalized, schema, test, binary);
        result.rules.push_back(std::move(normalized));
      }

      int target_examples = 0;
      for (const auto& ex : train)
        if (ex.label() == binary) ++target_examples;

      if (result.rules.empty()) {
        result.note = target_examples == 0 ? "no " + target + " examples in the train set"
                                           : "no " + target + " rules extracted";
      } else {
        result.best = rules::select_best(result.rules);
      }

      nlohmann::ordered_json rules_json;
      rules_json["method"] = method;
      rules_json["target"] = target;
      auto arr = nlohmann::ordered_json::array();
      for (const auto& r : result.rules) arr.push_back(rules::to_json(r));
      rules_json["rules"] = std::move(arr);
      if (result.best) rules_json["best"] = rules::to_json(*result.best);
      if (!result.note.empty()) rules_json["note"] = result.note;
      io::write_file(out_path("rules_" + method + "_" + target + ".json"),
                     rules_json.dump(2) + "\n");

      if (result.best) {
        result.refined = refine::splice(program, *result.best);
        io::write_file(out_path("refined_" + method + "_" + target + ".scn"),
                       dsl::emit(result.refined->spliced));

        if (fault) {
          refine::ValidateOptions vopts;
          vopts.n_samples = cfg.validate_size;
          vopts.seed = RngStream(cfg.seed).derive("validate");
          vopts.iou_threshold = cfg.iou_threshold;
          vopts.f1_threshold = cfg.f1_threshold;
          vopts.max_rejections_per_sample = cfg.max_rejections;
          vopts.camera = cfg.camera;
          vopts.view = sampler_cfg.view;
          result.validation = refine::validate(*result.refined, *fault, vopts);
          io::write_file(out_path("validation_" + method + "_" + target + ".json"),
                         refine::to_json(*result.validation).dump(2) + "\n");
          io::write_file(out_path("validation_" + method + "_" + target + ".csv"),
                         refine::cumulative_csv(*result.validation));
        } else {
          result.note = "validation skipped: external detections cannot label fresh samples";
        }

        double se = 0.0;
        result.feature_space_coverage = refine::feature_space_coverage(
            program, *result.best, cfg.coverage_samples, RngStream(cfg.seed).derive("coverage"),
            &se, cfg.max_rejections);
        result.coverage_stderr = se;
      }
      report.results.push_back(std::move(result));
    }
  }

  // summary.json
  nlohmann::ordered_json summary;
  summary["scenario"] = cfg.scenario_path;
  summary["seed"] = cfg.seed;
  summary["sizes"] = {{"train", cfg.train_size},
                      {"test", cfg.test_size},
                      {"validate", cfg.validate_size}};
  summary["thresholds"] = {{"iou", cfg.iou_threshold}, {"f1", cfg.f1_threshold}};
  summary["baseline"] = {{"trainIncorrectRatio", report.train_incorrect_ratio},
                         {"testIncorrectRatio", report.test_incorrect_ratio},
                         {"testCorrectRatio", 1.0 - report.test_incorrect_ratio}};
  if (report.correct_pattern) {
    summary["decisionPatterns"] = {{"correct", whitebox::to_json(*report.correct_pattern)},
                                   {"incorrect", whitebox::to_json(*report.incorrect_pattern)}};
  }
  nlohmann::ordered_json methods_json;
  for (const auto& r : report.results) {
    nlohmann::ordered_json entry;
    entry["ruleCount"] = r.rules.size();
    if (r.best) {
      entry["best"] = rules::to_json(*r.best);
      entry["refinedProgram"] = "refined_" + r.method + "_" + r.target + ".scn";
    }
    if (r.validation) entry["validation"] = refine::to_json(*r.validation);
    if (r.feature_space_coverage) {
      entry["featureSpaceCoverage"] = *r.feature_space_coverage;
      entry["coverageStderr"] = r.coverage_stderr;
    }
    if (!r.note.empty()) entry["note"] = r.note;
    methods_json[r.method][r.target] = std::move(entry);
  }
  summary["methods"] = std::move(methods_json);
  io::write_file(out_path("summary.json"), summary.dump(2) + "\n");

  // summary.md
  std::string md;
  md += "# Scenario debugging summary\n\n";
  md += "- scenario: `" + cfg.scenario_path + "`\n";
  md += "- seed: " + std::to_string(cfg.seed) + "\n";
  md += "- train/test/validate: " + std::to_string(cfg.train_size) + "/" +
        std::to_string(cfg.test_size) + "/" + std::to_string(cfg.validate_size) + "\n";
  md += "- baseline incorrect ratio (test): " + dsl::format_number(report.test_incorrect_ratio) +
        "\n\n";
  if (report.correct_pattern) {
    md += "## Decision pattern support\n\n";
    md += "| label | support |\n|---|---|\n";
    md += "| correct | " + dsl::format_number(report.correct_pattern->support) + " |\n";
    md += "| incorrect | " + dsl::format_number(report.incorrect_pattern->support) + " |\n\n";
  }
  for (const std::string& target : {std::string("correct"), std::string("incorrect")}) {
    md += "## Best " + target + " rules\n\n";
    md += "| method | rule | test precision | test coverage | refined " + target + " ratio |";
    md += target == "incorrect" ? " feature-space coverage |\n" : "\n";
    md += "|---|---|---|---|---|";
    md += target == "incorrect" ? "---|\n" : "\n";
    for (const auto& r : report.results) {
      if (r.target != target) continue;
      md += "| " + r.method + " | ";
      if (!r.best) {
        md += "(" + r.note + ") | | | |";
        md += target == "incorrect" ? " |\n" : "\n";
        continue;
      }
      md += rules::to_text(*r.best) + " | ";
      md += dsl::format_number(r.best->measured->precision) + " | ";
      md += dsl::format_number(r.best->measured->coverage) + " | ";
      if (r.validation) {
        double ratio = target == "incorrect" ? r.validation->incorrect_ratio
                                             : r.validation->correct_ratio;
        md += dsl::format_number(ratio);
      } else {
        md += "n/a";
      }
      md += " |";
      if (target == "incorrect") {
        md += r.feature_space_coverage ? " " + dsl::format_number(*r.feature_space_coverage) + " |"
                                       : " |";
      }
      md += "\n";
    }
    md += "\n";
  }
  io::write_file(out_path("summary.md"), md);

  return report;
}

}  // namespace scendbg::pipeline
