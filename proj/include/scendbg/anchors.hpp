#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scendbg/evaluator.hpp"
#include "scendbg/rules.hpp"
#include "scendbg/sampler.hpp"
#include "scendbg/value.hpp"

namespace scendbg::anchors {

struct AnchorConfig {
  double precision_threshold = 0.95;  // tau
  double delta = 0.05;
  double tolerance = 0.1;  // epsilon: best-arm gap at which LUCB stops
  int beam_width = 10;
  int batch_size = 32;
  int max_anchor_size = 0;          // 0: as many predicates as usable features
  int max_covered_per_label = 50;
  int discretization_bins = 4;      // quantile bins per numeric feature
  int max_samples_per_arm = 10000;
  int max_total_samples = 500000;   // per explained instance
  std::uint64_t seed = 0;
};

/// Quantile discretization of numeric features, fit on training data.
/// Categorical features bin to their exact value.
class Discretizer {
 public:
  Discretizer(const dsl::FeatureSchema& schema, std::span<const eval::LabeledExample> train,
              int bins);

  /// Predicate for the bin containing `v`; nullopt when the feature has a
  /// single degenerate bin (constant features) and is useless as an anchor.
  std::optional<rules::Predicate> bin_predicate(std::size_t feature, const Value& v) const;

  const dsl::FeatureSchema& schema() const { return *schema_; }

 private:
  const dsl::FeatureSchema* schema_;
  std::vector<std::vector<double>> cuts_;  // per numeric feature, sorted distinct
};

/// Black-box prediction over feature vectors, returning a class id.
using SurrogateFn = std::function<int(const FeatureVector&)>;

struct ArmTrace {
  std::string anchor;
  int samples = 0;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 1.0;
};

struct AnchorTrace {
  std::int64_t instance_seed_index = 0;
  std::vector<std::vector<ArmTrace>> rounds;  // per anchor size
  std::string returned;
  double returned_lower = 0.0;
  bool certified = false;
  int total_samples = 0;
};

nlohmann::ordered_json to_json(const AnchorTrace& trace);

struct AnchorResult {
  rules::Rule rule;
  double precision_estimate = 0.0;
  double lower_bound = 0.0;
  bool certified = false;  // lower bound exceeded tau at confidence 1 - delta
};

/// Bottom-up beam search over bin predicates consistent with the instance.
/// Precision is estimated against the surrogate on program-conditional
/// perturbations; KL-LUCB confidence bounds drive arm selection and the
/// stopping rule. Returns the smallest anchor certified above tau, or the
/// highest-lower-bound anchor otherwise.
AnchorResult explain_instance(const FeatureVector& instance, int target_class,
                              const SurrogateFn& surrogate,
                              const sample::ProgramSampler& sampler, const Discretizer& disc,
                              const AnchorConfig& cfg, const std::string& target_name,
                              AnchorTrace* trace = nullptr);

/// Applies explain_instance over target-labeled training instances in
/// seedIndex order, skipping instances covered by an already-extracted
/// anchor, until `max_covered_per_label` instances are covered or instances
/// are exhausted. Returns deduplicated rules.
std::vector<rules::Rule> extract_anchor_rules(std::span<const eval::LabeledExample> train,
                                              const std::string& target_name, bool augmented,
                                              int target_class, const SurrogateFn& surrogate,
                                              const sample::ProgramSampler& sampler,
                                              const Discretizer& disc, const AnchorConfig& cfg,
                                              std::vector<AnchorTrace>* traces = nullptr);

/// Bernoulli KL divergence and the KL-LUCB confidence bounds (exposed for
/// the statistical soundness tests).
double kl_bernoulli(double p, double q);
double kl_upper_bound(double mean, int n, double beta);
double kl_lower_bound(double mean, int n, double beta);
double lucb_beta(int arm_count, int round, double delta);

}  // namespace scendbg::anchors
