#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scendbg/dsl/schema.hpp"
#include "scendbg/rules.hpp"
#include "scendbg/value.hpp"
#include "scendbg/world.hpp"

namespace scendbg::detect {

struct DetectorOutput {
  std::vector<world::Detection> detections;
  std::optional<std::vector<double>> activations;
};

enum class FaultEffect { Drop, NoiseScale, Duplicate };

/// One planted failure mode: when the predicates match a feature vector the
/// effect applies to that image's detections.
struct FailureRule {
  std::vector<rules::Predicate> predicates;
  FaultEffect effect = FaultEffect::Drop;
  double magnitude = 0.0;  // probability for Drop/Duplicate, factor for NoiseScale
};

/// Drives one activation channel: tanh(bias + sum(w * normalized feature)
/// + strength * (+-1 for rule match)) + channel noise.
struct ActivationCoupling {
  int channel = 0;
  std::optional<int> rule_index;
  std::vector<std::pair<std::string, double>> feature_weights;
  double bias = 0.0;
  double strength = 0.0;
};

struct FaultModelConfig {
  std::vector<FailureRule> failure_rules;
  double base_jitter_px = 0.0;
  double base_drop_prob = 0.0;
  double base_duplicate_prob = 0.0;
  int activation_dim = 16;
  double activation_noise = 0.1;
  std::vector<ActivationCoupling> couplings;  // empty: defaults derived from rules/schema
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

/// The synthetic perception module: ground-truth boxes degraded per config.
/// Deterministic given (scene, f, cfg.seed, f.seed_index).
DetectorOutput detect(const world::Scene& scene, const FeatureVector& f,
                      const FaultModelConfig& cfg, const dsl::FeatureSchema& schema);

/// JSON Lines: {"_seedIndex": i, "detections": [{"box": [x0,y0,x1,y1],
/// "confidence": c}, ...], "activations": [...]}. Throws ParseError with the
/// offending record index.
std::map<std::int64_t, DetectorOutput> load_external_detections(const std::string& path);

FaultModelConfig fault_model_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const FaultModelConfig& cfg);
/// Reads .json or .toml by extension.
FaultModelConfig load_fault_model(const std::string& path);

/// Uniform interface over the synthetic detector and pre-recorded outputs.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual DetectorOutput run(const world::Scene& scene, const FeatureVector& f) const = 0;
  /// False for replayed outputs: no new samples can be labeled.
  virtual bool supports_fresh_samples() const { return true; }
};

class SyntheticDetector final : public Detector {
 public:
  SyntheticDetector(FaultModelConfig cfg, const dsl::FeatureSchema& schema)
      : cfg_(std::move(cfg)), schema_(&schema) {
    cfg_.validate();
  }
  DetectorOutput run(const world::Scene& scene, const FeatureVector& f) const override {
    return detect(scene, f, cfg_, *schema_);
  }
  const FaultModelConfig& config() const { return cfg_; }

 private:
  FaultModelConfig cfg_;
  const dsl::FeatureSchema* schema_;
};

class ExternalDetector final : public Detector {
 public:
  explicit ExternalDetector(std::map<std::int64_t, DetectorOutput> outputs)
      : outputs_(std::move(outputs)) {}
  DetectorOutput run(const world::Scene&, const FeatureVector& f) const override {
    auto it = outputs_.find(f.seed_index);
    if (it == outputs_.end()) throw MissingSample(f.seed_index);
    return it->second;
  }
  bool supports_fresh_samples() const override { return false; }

 private:
  std::map<std::int64_t, DetectorOutput> outputs_;
};

}  // namespace scendbg::detect
