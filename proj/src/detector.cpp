#include "scendbg/detector.hpp"

#include <algorithm>
#include <cmath>

#include "scendbg/io.hpp"
#include "scendbg/rng.hpp"

namespace scendbg::detect {

void FaultModelConfig::validate() const {
  auto check_prob = [](double p, const char* what) {
    if (p < 0.0 || p > 1.0) throw ConfigError(std::string(what) + " must be in [0, 1]");
  };
  check_prob(base_drop_prob, "base drop probability");
  check_prob(base_duplicate_prob, "base duplicate probability");
  if (base_jitter_px < 0.0) throw ConfigError("base jitter must be >= 0");
  if (activation_dim < 1) throw ConfigError("activation dim must be >= 1");
  if (activation_noise < 0.0) throw ConfigError("activation noise must be >= 0");
  for (const auto& fr : failure_rules) {
    if (fr.effect == FaultEffect::NoiseScale) {
      if (fr.magnitude < 0.0) throw ConfigError("noise-scale magnitude must be >= 0");
    } else {
      check_prob(fr.magnitude, "failure-rule magnitude");
    }
  }
  for (const auto& c : couplings) {
    if (c.channel < 0 || c.channel >= activation_dim)
      throw ConfigError("coupling channel out of range");
    if (c.rule_index && (*c.rule_index < 0 ||
                         static_cast<std::size_t>(*c.rule_index) >= failure_rules.size()))
      throw ConfigError("coupling rule index out of range");
  }
}

namespace {

/// Normalizes a feature value to roughly [-1, 1] for activation drives.
double normalize_feature(const dsl::FeatureDescriptor& fd, const Value& v) {
  if (fd.kind == dsl::FeatureKind::Categorical) {
    if (fd.categories.size() < 2) return 0.0;
    auto it = std::find(fd.categories.begin(), fd.categories.end(), as_string(v));
    if (it == fd.categories.end()) return 0.0;
    double idx = static_cast<double>(it - fd.categories.begin());
    return 2.0 * idx / (static_cast<double>(fd.categories.size()) - 1.0) - 1.0;
  }
  double x = as_number(v);
  if (std::isfinite(fd.lo) && std::isfinite(fd.hi) && fd.hi > fd.lo)
    return 2.0 * (x - fd.lo) / (fd.hi - fd.lo) - 1.0;
  return x / 60.0;  // unbounded (computed fields, distances): meters-scale squash input
}

std::vector<ActivationCoupling> default_couplings(const FaultModelConfig& cfg,
                                                  const dsl::FeatureSchema& schema) {
  std::vector<ActivationCoupling> out;
  for (int j = 0; j < cfg.activation_dim; ++j) {
    ActivationCoupling c;
    c.channel = j;
    if (static_cast<std::size_t>(j) < cfg.failure_rules.size()) {
      c.rule_index = j;
      c.strength = 2.0;
    } else if (schema.size() > 0) {
      std::size_t fi = static_cast<std::size_t>(j) % schema.size();
      c.feature_weights.emplace_back(schema.at(fi).name, 1.0);
    }
    out.push_back(std::move(c));
  }
  return out;
}

world::BoundingBox jittered(const world::BoundingBox& box, double sigma, RngStream& rng,
                            const world::CameraConfig& frame) {
  world::BoundingBox out = box;
  out.x_min += sigma * rng.gaussian();
  out.y_min += sigma * rng.gaussian();
  out.x_max += sigma * rng.gaussian();
  out.y_max += sigma * rng.gaussian();
  if (out.x_min > out.x_max) std::swap(out.x_min, out.x_max);
  if (out.y_min > out.y_max) std::swap(out.y_min, out.y_max);
  out.x_min = std::clamp(out.x_min, 0.0, frame.image_width);
  out.x_max = std::clamp(out.x_max, 0.0, frame.image_width);
  out.y_min = std::clamp(out.y_min, 0.0, frame.image_height);
  out.y_max = std::clamp(out.y_max, 0.0, frame.image_height);
  return out;
}

bool degenerate(const world::BoundingBox& box) {
  return box.x_min >= box.x_max || box.y_min >= box.y_max;
}

}  // namespace

DetectorOutput detect(const world::Scene& scene, const FeatureVector& f,
                      const FaultModelConfig& cfg, const dsl::FeatureSchema& schema) {
  RngStream rng = RngStream::substream(cfg.seed, static_cast<std::uint64_t>(f.seed_index));

  std::vector<bool> rule_matched(cfg.failure_rules.size(), false);
  bool any_matched = false;
  for (std::size_t i = 0; i < cfg.failure_rules.size(); ++i) {
    rules::Rule probe;
    probe.predicates = cfg.failure_rules[i].predicates;
    rule_matched[i] = rules::matches(probe, schema, f);
    any_matched = any_matched || rule_matched[i];
  }

  double sigma = cfg.base_jitter_px;
  for (std::size_t i = 0; i < cfg.failure_rules.size(); ++i)
    if (rule_matched[i] && cfg.failure_rules[i].effect == FaultEffect::NoiseScale)
      sigma *= cfg.failure_rules[i].magnitude;

  double confidence = sigma == 0.0 ? 1.0 : std::max(0.1, 1.0 - sigma / 50.0);

  DetectorOutput out;
  for (const auto& gt : world::ground_truth_boxes(scene)) {
    bool dropped = cfg.base_drop_prob > 0.0 && rng.bernoulli(cfg.base_drop_prob);
    for (std::size_t i = 0; i < cfg.failure_rules.size(); ++i) {
      const auto& fr = cfg.failure_rules[i];
      if (rule_matched[i] && fr.effect == FaultEffect::Drop && fr.magnitude > 0.0 &&
          rng.bernoulli(fr.magnitude))
        dropped = true;
    }
    if (dropped) continue;

    world::BoundingBox box = sigma > 0.0 ? jittered(gt, sigma, rng, scene.camera_config) : gt;
    if (!degenerate(box)) out.detections.push_back({box, confidence});

    bool duplicate = cfg.base_duplicate_prob > 0.0 && rng.bernoulli(cfg.base_duplicate_prob);
    for (std::size_t i = 0; i < cfg.failure_rules.size(); ++i) {
      const auto& fr = cfg.failure_rules[i];
      if (rule_matched[i] && fr.effect == FaultEffect::Duplicate && fr.magnitude > 0.0 &&
          rng.bernoulli(fr.magnitude))
        duplicate = true;
    }
    if (duplicate) {
      world::BoundingBox dup = jittered(gt, std::max(sigma, 2.0), rng, scene.camera_config);
      if (!degenerate(dup)) out.detections.push_back({dup, 0.5 * confidence});
    }
  }

  const auto& couplings = cfg.couplings.empty()
                              ? default_couplings(cfg, schema)
                              : cfg.couplings;
  std::vector<double> activations(static_cast<std::size_t>(cfg.activation_dim), 0.0);
  for (const auto& c : couplings) {
    double z = c.bias;
    if (c.rule_index) z += c.strength * (rule_matched[static_cast<std::size_t>(*c.rule_index)] ? 1.0 : -1.0);
    else if (c.strength != 0.0) z += c.strength * (any_matched ? 1.0 : -1.0);
    for (const auto& [name, weight] : c.feature_weights) {
      int idx = schema.index_of(name);
      if (idx < 0) throw UnknownFeature(name);
      z += weight * normalize_feature(schema.at(static_cast<std::size_t>(idx)),
                                      f.values.at(static_cast<std::size_t>(idx)));
    }
    activations[static_cast<std::size_t>(c.channel)] = std::tanh(z);
  }
  if (cfg.activation_noise > 0.0) {
    for (auto& a : activations) a += cfg.activation_noise * rng.gaussian();
  }
  out.activations = std::move(activations);
  return out;
}

std::map<std::int64_t, DetectorOutput> load_external_detections(const std::string& path) {
  std::map<std::int64_t, DetectorOutput> out;
  auto records = io::read_jsonl(path);
  std::optional<std::size_t> activation_len;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto record_index = static_cast<std::int64_t>(i);
    try {
      std::int64_t seed_index = r.at("_seedIndex").get<std::int64_t>();
      DetectorOutput d;
      for (const auto& det : r.value("detections", nlohmann::json::array())) {
        const auto& b = det.at("box");
        if (!b.is_array() || b.size() != 4)
          throw ParseError("box must be [x0, y0, x1, y1]", record_index);
        world::Detection detection;
        detection.box.x_min = b[0].get<double>();
        detection.box.y_min = b[1].get<double>();
        detection.box.x_max = b[2].get<double>();
        detection.box.y_max = b[3].get<double>();
        detection.confidence = det.value("confidence", 1.0);
        if (detection.box.x_min >= detection.box.x_max ||
            detection.box.y_min >= detection.box.y_max)
          throw ParseError("degenerate box (min >= max)", record_index);
        if (detection.confidence < 0.0 || detection.confidence > 1.0)
          throw ParseError("confidence must be in [0, 1]", record_index);
        d.detections.push_back(std::move(detection));
      }
      if (r.contains("activations") && !r.at("activations").is_null()) {
        auto acts = r.at("activations").get<std::vector<double>>();
        if (activation_len && acts.size() != *activation_len)
          throw ParseError("activation length differs from earlier records", record_index);
        activation_len = acts.size();
        d.activations = std::move(acts);
      }
      if (!out.emplace(seed_index, std::move(d)).second)
        throw ParseError("duplicate _seedIndex", record_index);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), record_index);
    }
  }
  return out;
}

namespace {

FaultEffect effect_from_string(const std::string& s) {
  if (s == "drop") return FaultEffect::Drop;
  if (s == "noise_scale") return FaultEffect::NoiseScale;
  if (s == "duplicate") return FaultEffect::Duplicate;
  throw ConfigError("unknown fault effect: " + s);
}

const char* effect_to_string(FaultEffect e) {
  switch (e) {
    case FaultEffect::Drop: return "drop";
    case FaultEffect::NoiseScale: return "noise_scale";
    case FaultEffect::Duplicate: return "duplicate";
  }
  return "?";
}

}  // namespace

FaultModelConfig fault_model_from_json(const nlohmann::json& j) {
  FaultModelConfig cfg;
  cfg.seed = j.value("seed", 0ULL);
  if (j.contains("base")) {
    const auto& b = j.at("base");
    cfg.base_jitter_px = b.value("jitter_px", 0.0);
    cfg.base_drop_prob = b.value("drop_prob", 0.0);
    cfg.base_duplicate_prob = b.value("duplicate_prob", 0.0);
  }
  if (j.contains("activations")) {
    const auto& a = j.at("activations");
    cfg.activation_dim = a.value("dim", 16);
    cfg.activation_noise = a.value("noise", 0.1);
    for (const auto& c : a.value("couplings", nlohmann::json::array())) {
      ActivationCoupling coupling;
      coupling.channel = c.at("channel").get<int>();
      if (c.contains("rule")) coupling.rule_index = c.at("rule").get<int>();
      coupling.bias = c.value("bias", 0.0);
      coupling.strength = c.value("strength", 0.0);
      for (const auto& fw : c.value("features", nlohmann::json::array())) {
        if (fw.is_array())
          coupling.feature_weights.emplace_back(fw.at(0).get<std::string>(),
                                                fw.at(1).get<double>());
        else
          coupling.feature_weights.emplace_back(fw.at("name").get<std::string>(),
                                                fw.value("weight", 1.0));
      }
      cfg.couplings.push_back(std::move(coupling));
    }
  }
  for (const auto& r : j.value("rules", nlohmann::json::array())) {
    FailureRule fr;
    fr.effect = effect_from_string(r.at("effect").get<std::string>());
    fr.magnitude = r.at("magnitude").get<double>();
    fr.predicates = rules::predicates_from_json(r.at("predicates"));
    cfg.failure_rules.push_back(std::move(fr));
  }
  cfg.validate();
  return cfg;
}

nlohmann::ordered_json to_json(const FaultModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["base"] = {{"jitter_px", cfg.base_jitter_px},
               {"drop_prob", cfg.base_drop_prob},
               {"duplicate_prob", cfg.base_duplicate_prob}};
  nlohmann::ordered_json acts;
  acts["dim"] = cfg.activation_dim;
  acts["noise"] = cfg.activation_noise;
  auto couplings = nlohmann::ordered_json::array();
  for (const auto& c : cfg.couplings) {
    nlohmann::ordered_json e;
    e["channel"] = c.channel;
    if (c.rule_index) e["rule"] = *c.rule_index;
    e["bias"] = c.bias;
    e["strength"] = c.strength;
    auto fws = nlohmann::ordered_json::array();
    for (const auto& [name, weight] : c.feature_weights)
      fws.push_back(nlohmann::ordered_json::array({name, weight}));
    e["features"] = std::move(fws);
    couplings.push_back(std::move(e));
  }
  acts["couplings"] = std::move(couplings);
  j["activations"] = std::move(acts);
  auto rules_json = nlohmann::ordered_json::array();
  for (const auto& fr : cfg.failure_rules) {
    nlohmann::ordered_json e;
    e["effect"] = effect_to_string(fr.effect);
    e["magnitude"] = fr.magnitude;
    e["predicates"] = rules::predicates_to_json(fr.predicates);
    rules_json.push_back(std::move(e));
  }
  j["rules"] = std::move(rules_json);
  return j;
}

FaultModelConfig load_fault_model(const std::string& path) {
  return fault_model_from_json(io::read_config(path));
}

}  // namespace scendbg::detect
