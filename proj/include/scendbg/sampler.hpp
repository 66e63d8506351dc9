#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "scendbg/dsl/ast.hpp"
#include "scendbg/dsl/eval.hpp"
#include "scendbg/dsl/schema.hpp"
#include "scendbg/rng.hpp"
#include "scendbg/value.hpp"

namespace scendbg::sample {

struct SamplerConfig {
  std::uint64_t seed = 0;
  int max_rejections_per_sample = 10000;
  dsl::ViewConfig view;  // visibleFrom() semantics inside `require`
};

/// Narrows or pins one declared feature during constrained sampling.
/// Numeric bounds intersect the declared domain; for features computed from
/// expressions the bounds are enforced by rejection instead.
struct FeatureConstraint {
  int feature = -1;
  std::optional<double> lo;
  bool lo_strict = false;
  std::optional<double> hi;
  bool hi_strict = false;
  std::vector<std::string> allowed;  // categorical narrowing (nonempty when used)
  std::optional<Value> pin;          // exact value; wins over narrowing
};

using AcceptFn = std::function<bool(const FeatureVector&)>;

/// Rejection sampler over a validated program. Each sample index gets its own
/// counter-based RNG stream, so results are independent of evaluation order
/// and worker count.
class ProgramSampler {
 public:
  ProgramSampler(const dsl::ScenarioProgram& program, SamplerConfig cfg);

  const dsl::FeatureSchema& schema() const { return schema_; }
  const dsl::ScenarioProgram& program() const { return *program_; }
  const SamplerConfig& config() const { return cfg_; }

  /// Declared + derived features for sample `index`; throws RejectionExhausted.
  FeatureVector sample_at(std::int64_t index) const;

  std::vector<FeatureVector> sample(std::size_t n) const;

  /// Draws one vector from the program conditioned on `constraints`, using the
  /// caller's stream. Pinned features are copied, narrowable ones drawn from
  /// the intersected domain, everything else (derived features, `require`s,
  /// `accept`) enforced by rejection.
  FeatureVector sample_constrained(RngStream& rng, std::span<const FeatureConstraint> constraints,
                                   const AcceptFn& accept, std::int64_t seed_index) const;

 private:
  FeatureVector attempt(RngStream& rng, std::span<const FeatureConstraint> by_slot,
                        std::int64_t seed_index) const;

  const dsl::ScenarioProgram* program_;
  SamplerConfig cfg_;
  dsl::FeatureSchema schema_;
};

std::vector<FeatureVector> sample(const dsl::ScenarioProgram& program, std::size_t n,
                                  const SamplerConfig& cfg);

/// Fills the derived tail (dist / headingDiff per non-ego object) of a vector
/// whose declared prefix is populated.
FeatureVector derive_features(const dsl::ScenarioProgram& program,
                              const dsl::FeatureSchema& schema, FeatureVector raw);
FeatureVector derive_features(const dsl::ScenarioProgram& program, FeatureVector raw);

/// Resamples every declared feature not named in `fixed`, holding fixed ones
/// at their base value and re-enforcing the program's `require`s. A derived
/// feature name in `fixed` is enforced by rejection on exact equality, which
/// succeeds trivially when all of its inputs are fixed and exhausts the
/// budget otherwise.
FeatureVector conditional_resample(const dsl::ScenarioProgram& program, const FeatureVector& base,
                                   const std::set<std::string>& fixed, const SamplerConfig& cfg);

}  // namespace scendbg::sample
