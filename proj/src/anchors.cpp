#include "scendbg/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "scendbg/errors.hpp"
#include "scendbg/rng.hpp"

namespace scendbg::anchors {

Discretizer::Discretizer(const dsl::FeatureSchema& schema,
                         std::span<const eval::LabeledExample> train, int bins)
    : schema_(&schema) {
  if (bins < 2) throw ConfigError("discretization needs at least 2 bins");
  cuts_.resize(schema.size());
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (schema.at(f).kind == dsl::FeatureKind::Categorical) continue;
    std::vector<double> values;
    values.reserve(train.size());
    for (const auto& ex : train) values.push_back(as_number(ex.features.values.at(f)));
    if (values.empty()) continue;
    std::sort(values.begin(), values.end());
    std::vector<double> cuts;
    for (int b = 1; b < bins; ++b) {
      // order statistic at quantile b/bins
      double q = static_cast<double>(b) / bins;
      auto idx = static_cast<std::size_t>(q * (static_cast<double>(values.size()) - 1.0));
      double cut = values[idx];
      if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
    }
    // drop cuts equal to the extremes: they would create empty bins
    while (!cuts.empty() && cuts.front() <= values.front()) cuts.erase(cuts.begin());
    while (!cuts.empty() && cuts.back() >= values.back()) cuts.pop_back();
    cuts_[f] = std::move(cuts);
  }
}

std::optional<rules::Predicate> Discretizer::bin_predicate(std::size_t feature,
                                                           const Value& v) const {
  const auto& fd = schema_->at(feature);
  rules::Predicate p;
  p.feature = fd.name;
  if (fd.kind == dsl::FeatureKind::Categorical) {
    if (fd.categories.size() < 2) return std::nullopt;  // constant categorical
    p.constraint = rules::Membership{{as_string(v)}};
    return p;
  }
  const auto& cuts = cuts_[feature];
  if (cuts.empty()) return std::nullopt;  // constant numeric feature
  double x = as_number(v);
  rules::NumericRange range;
  // bins: (-inf, c0], (c0, c1], ..., (c_last, +inf)
  std::size_t bin = 0;
  while (bin < cuts.size() && x > cuts[bin]) ++bin;
  if (bin > 0) {
    range.lo = cuts[bin - 1];
    range.lo_strict = true;
  }
  if (bin < cuts.size()) range.hi = cuts[bin];
  p.constraint = range;
  return p;
}

double kl_bernoulli(double p, double q) {
  constexpr double kEps = 1e-12;
  p = std::min(std::max(p, 0.0), 1.0);
  q = std::min(std::max(q, kEps), 1.0 - kEps);
  double kl = 0.0;
  if (p > 0.0) kl += p * std::log(p / q);
  if (p < 1.0) kl += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
  return kl;
}

double kl_upper_bound(double mean, int n, double beta) {
  if (n <= 0) return 1.0;
  double level = beta / n;
  double lo = mean, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    double mid = (lo + hi) / 2.0;
    if (kl_bernoulli(mean, mid) > level)
      hi = mid;
    else
      lo = mid;
  }
  return lo;
}

double kl_lower_bound(double mean, int n, double beta) {
  if (n <= 0) return 0.0;
  double level = beta / n;
  double lo = 0.0, hi = mean;
  for (int it = 0; it < 60; ++it) {
    double mid = (lo + hi) / 2.0;
    if (kl_bernoulli(mean, mid) > level)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

double lucb_beta(int arm_count, int round, double delta) {
  constexpr double kAlpha = 1.1;
  constexpr double kScale = 405.5;
  double theta = std::log(kScale * std::max(arm_count, 1) *
                          std::pow(static_cast<double>(std::max(round, 1)), kAlpha) / delta);
  return theta + std::log(std::max(theta, 1.0000001));
}

namespace {

struct Arm {
  std::vector<rules::Predicate> predicates;  // sorted by feature index
  std::vector<int> features;                 // schema indices used
  std::string text;
  std::vector<sample::FeatureConstraint> constraints;
  RngStream rng{0};
  int n = 0;
  int positives = 0;
  bool dead = false;  // constraints unsatisfiable under the program

  double mean() const { return n > 0 ? static_cast<double>(positives) / n : 0.0; }
};

std::string canonical_text(const std::vector<rules::Predicate>& predicates) {
  rules::Rule probe;
  probe.predicates = predicates;
  return rules::to_text(probe);
}

sample::FeatureConstraint to_constraint(const rules::Predicate& p,
                                        const dsl::FeatureSchema& schema) {
  sample::FeatureConstraint c;
  c.feature = schema.index_of(p.feature);
  if (c.feature < 0) throw UnknownFeature(p.feature);
  if (const auto* range = std::get_if<rules::NumericRange>(&p.constraint)) {
    c.lo = range->lo;
    c.lo_strict = range->lo_strict;
    c.hi = range->hi;
    c.hi_strict = range->hi_strict;
  } else {
    c.allowed = std::get<rules::Membership>(p.constraint).values;
  }
  return c;
}

class InstanceExplainer {
 public:
  InstanceExplainer(const FeatureVector& instance, int target_class,
                    const SurrogateFn& surrogate, const sample::ProgramSampler& sampler,
                    const Discretizer& disc, const AnchorConfig& cfg, AnchorTrace* trace)
      : instance_(instance),
        target_(target_class),
        surrogate_(surrogate),
        sampler_(sampler),
        cfg_(cfg),
        trace_(trace) {
    const auto& schema = sampler.schema();
    for (std::size_t f = 0; f < schema.size(); ++f) {
      auto p = disc.bin_predicate(f, instance.values.at(f));
      if (p) candidate_predicates_.emplace_back(static_cast<int>(f), std::move(*p));
    }
  }

  AnchorResult run() {
    if (surrogate_(instance_) != target_)
      throw SurrogateDisagrees("surrogate does not predict the target for this instance");

    int max_size = cfg_.max_anchor_size > 0
                       ? std::min<int>(cfg_.max_anchor_size,
                                       static_cast<int>(candidate_predicates_.size()))
                       : static_cast<int>(candidate_predicates_.size());

    Arm empty_arm = make_arm({}, {});
    refine_to_decision(empty_arm);
    Arm best = empty_arm;
    double best_lb = lower_of(empty_arm);
    if (best_lb > cfg_.precision_threshold) return result(empty_arm, true);

    std::vector<Arm> beam;
    beam.push_back(std::move(empty_arm));

    for (int size = 1; size <= max_size; ++size) {
      std::vector<Arm> cands = extend(beam);
      if (cands.empty()) break;
      lucb_select(cands);

      // order survivors by estimate, best first
      std::vector<std::size_t> order(cands.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (cands[a].dead != cands[b].dead) return !cands[a].dead;
        if (cands[a].mean() != cands[b].mean()) return cands[a].mean() > cands[b].mean();
        return cands[a].text < cands[b].text;
      });

      std::vector<Arm> survivors;
      for (std::size_t rank = 0;
           rank < order.size() && survivors.size() < static_cast<std::size_t>(cfg_.beam_width);
           ++rank) {
        Arm& arm = cands[order[rank]];
        if (arm.dead) continue;
        survivors.push_back(std::move(arm));
      }
      if (survivors.empty()) break;

      if (trace_) record_round(survivors);

      // try to certify the best few at this size; smallest certified wins
      for (Arm& arm : survivors) {
        refine_to_decision(arm);
        double lb = lower_of(arm);
        if (lb > best_lb) {
          best_lb = lb;
          best = arm;
        }
        if (lb > cfg_.precision_threshold) return result(arm, true);
      }
      beam = std::move(survivors);
      if (total_samples_ >= cfg_.max_total_samples) break;
    }
    return result(best, false);
  }

 private:
  Arm make_arm(std::vector<int> features, std::vector<rules::Predicate> predicates) {
    Arm arm;
    arm.features = std::move(features);
    arm.predicates = std::move(predicates);
    std::vector<std::size_t> order(arm.predicates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return arm.features[a] < arm.features[b];
    });
    std::vector<rules::Predicate> sorted_preds;
    std::vector<int> sorted_feats;
    for (std::size_t i : order) {
      sorted_preds.push_back(arm.predicates[i]);
      sorted_feats.push_back(arm.features[i]);
    }
    arm.predicates = std::move(sorted_preds);
    arm.features = std::move(sorted_feats);
    arm.text = canonical_text(arm.predicates);
    for (const auto& p : arm.predicates)
      arm.constraints.push_back(to_constraint(p, sampler_.schema()));
    arm.rng = RngStream(mix64(cfg_.seed) ^ hash_bytes(arm.text) ^
                        mix64(static_cast<std::uint64_t>(instance_.seed_index)));
    return arm;
  }

  std::vector<Arm> extend(const std::vector<Arm>& beam) {
    std::vector<Arm> cands;
    std::set<std::string> seen;
    for (const Arm& arm : beam) {
      for (const auto& [feature, predicate] : candidate_predicates_) {
        if (std::find(arm.features.begin(), arm.features.end(), feature) != arm.features.end())
          continue;
        std::vector<int> features = arm.features;
        std::vector<rules::Predicate> predicates = arm.predicates;
        features.push_back(feature);
        predicates.push_back(predicate);
        Arm cand = make_arm(std::move(features), std::move(predicates));
        if (seen.insert(cand.text).second) cands.push_back(std::move(cand));
      }
    }
    return cands;
  }

  void draw_batch(Arm& arm) {
    if (arm.dead) return;
    for (int i = 0; i < cfg_.batch_size; ++i) {
      if (arm.n >= cfg_.max_samples_per_arm || total_samples_ >= cfg_.max_total_samples) return;
      FeatureVector z;
      try {
        z = sampler_.sample_constrained(arm.rng, arm.constraints, nullptr,
                                        instance_.seed_index);
      } catch (const RejectionExhausted&) {
        arm.dead = true;
        return;
      }
      ++arm.n;
      ++total_samples_;
      if (surrogate_(z) == target_) ++arm.positives;
    }
  }

  double lower_of(const Arm& arm) const {
    return kl_lower_bound(arm.mean(), arm.n, lucb_beta(arm_count_, std::max(arm.n, 1) / std::max(cfg_.batch_size, 1) + 1, cfg_.delta));
  }

  double upper_of(const Arm& arm) const {
    return kl_upper_bound(arm.mean(), arm.n, lucb_beta(arm_count_, std::max(arm.n, 1) / std::max(cfg_.batch_size, 1) + 1, cfg_.delta));
  }

  /// KL-LUCB best-arm rounds until the top beam_width arms separate from the
  /// rest by the configured tolerance.
  void lucb_select(std::vector<Arm>& arms) {
    arm_count_ = static_cast<int>(arms.size());
    for (Arm& arm : arms) draw_batch(arm);
    std::size_t top_k = std::min<std::size_t>(static_cast<std::size_t>(cfg_.beam_width),
                                              arms.size());
    for (int round = 1;; ++round) {
      if (total_samples_ >= cfg_.max_total_samples) return;
      std::vector<std::size_t> alive;
      for (std::size_t i = 0; i < arms.size(); ++i)
        if (!arms[i].dead) alive.push_back(i);
      if (alive.size() <= top_k) return;

      std::sort(alive.begin(), alive.end(), [&](std::size_t a, std::size_t b) {
        if (arms[a].mean() != arms[b].mean()) return arms[a].mean() > arms[b].mean();
        return arms[a].text < arms[b].text;
      });

      double beta = lucb_beta(arm_count_, round, cfg_.delta);
      std::size_t lt = alive[0];
      double lt_lb = 2.0;
      for (std::size_t i = 0; i < top_k; ++i) {
        double lb = kl_lower_bound(arms[alive[i]].mean(), arms[alive[i]].n, beta);
        if (lb < lt_lb) {
          lt_lb = lb;
          lt = alive[i];
        }
      }
      std::size_t ut = alive[top_k];
      double ut_ub = -1.0;
      for (std::size_t i = top_k; i < alive.size(); ++i) {
        double ub = kl_upper_bound(arms[alive[i]].mean(), arms[alive[i]].n, beta);
        if (ub > ut_ub) {
          ut_ub = ub;
          ut = alive[i];
        }
      }
      if (ut_ub - lt_lb < cfg_.tolerance) return;
      bool progressed = false;
      if (arms[lt].n < cfg_.max_samples_per_arm) {
        draw_batch(arms[lt]);
        progressed = true;
      }
      if (arms[ut].n < cfg_.max_samples_per_arm) {
        draw_batch(arms[ut]);
        progressed = true;
      }
      if (!progressed) return;
    }
  }

  /// Samples an arm until its interval decides against tau (or budgets end).
  void refine_to_decision(Arm& arm) {
    if (arm.dead) return;
    if (arm.n == 0) draw_batch(arm);
    while (!arm.dead && arm.n < cfg_.max_samples_per_arm &&
           total_samples_ < cfg_.max_total_samples) {
      double lb = lower_of(arm);
      double ub = upper_of(arm);
      if (lb > cfg_.precision_threshold || ub < cfg_.precision_threshold) return;
      if (ub - lb < cfg_.tolerance / 4.0) return;  // too close to tau to resolve
      draw_batch(arm);
    }
  }

  void record_round(const std::vector<Arm>& arms) {
    std::vector<ArmTrace> round;
    for (const Arm& arm : arms) {
      ArmTrace t;
      t.anchor = arm.text;
      t.samples = arm.n;
      t.mean = arm.mean();
      t.lower = lower_of(arm);
      t.upper = upper_of(arm);
      round.push_back(std::move(t));
    }
    trace_->rounds.push_back(std::move(round));
  }

  AnchorResult result(const Arm& arm, bool certified) {
    AnchorResult res;
    res.rule.predicates = arm.predicates;
    res.precision_estimate = arm.mean();
    res.lower_bound = lower_of(arm);
    res.certified = certified;
    if (trace_) {
      trace_->instance_seed_index = instance_.seed_index;
      trace_->returned = arm.text;
      trace_->returned_lower = res.lower_bound;
      trace_->certified = certified;
      trace_->total_samples = total_samples_;
    }
    return res;
  }

  const FeatureVector& instance_;
  int target_;
  const SurrogateFn& surrogate_;
  const sample::ProgramSampler& sampler_;
  const AnchorConfig& cfg_;
  AnchorTrace* trace_;
  std::vector<std::pair<int, rules::Predicate>> candidate_predicates_;
  int total_samples_ = 0;
  int arm_count_ = 1;
};

}  // namespace

AnchorResult explain_instance(const FeatureVector& instance, int target_class,
                              const SurrogateFn& surrogate,
                              const sample::ProgramSampler& sampler, const Discretizer& disc,
                              const AnchorConfig& cfg, const std::string& target_name,
                              AnchorTrace* trace) {
  InstanceExplainer explainer(instance, target_class, surrogate, sampler, disc, cfg, trace);
  AnchorResult res = explainer.run();
  res.rule.target = target_name;
  res.rule = rules::normalized(std::move(res.rule), sampler.schema());
  return res;
}

std::vector<rules::Rule> extract_anchor_rules(std::span<const eval::LabeledExample> train,
                                              const std::string& target_name, bool augmented,
                                              int target_class, const SurrogateFn& surrogate,
                                              const sample::ProgramSampler& sampler,
                                              const Discretizer& disc, const AnchorConfig& cfg,
                                              std::vector<AnchorTrace>* traces) {
  std::vector<rules::Rule> rules_out;
  std::set<std::string> seen_texts;

  auto is_target = [&](const eval::LabeledExample& ex) {
    if (augmented) return ex.augmented && std::string(to_string(*ex.augmented)) == target_name;
    return std::string(to_string(ex.label())) == target_name;
  };

  auto covered_count = [&]() {
    int covered = 0;
    for (const auto& ex : train) {
      if (!is_target(ex)) continue;
      for (const auto& r : rules_out) {
        if (rules::matches(r, sampler.schema(), ex.features)) {
          ++covered;
          break;
        }
      }
    }
    return covered;
  };

  int covered = 0;
  for (const auto& ex : train) {
    if (!is_target(ex)) continue;
    if (covered >= cfg.max_covered_per_label) break;
    bool already = false;
    for (const auto& r : rules_out) {
      if (rules::matches(r, sampler.schema(), ex.features)) {
        already = true;
        break;
      }
    }
    if (already) continue;

    AnchorTrace trace;
    AnchorResult res;
    try {
      res = explain_instance(ex.features, target_class, surrogate, sampler, disc, cfg,
                             target_name, traces ? &trace : nullptr);
    } catch (const SurrogateDisagrees&) {
      continue;  // the surrogate mislabels this instance; it cannot seed an anchor
    }
    if (traces) traces->push_back(std::move(trace));
    if (seen_texts.insert(rules::to_text(res.rule)).second)
      rules_out.push_back(std::move(res.rule));
    covered = covered_count();
  }
  return rules_out;
}

nlohmann::ordered_json to_json(const AnchorTrace& trace) {
  nlohmann::ordered_json j;
  j["instance"] = trace.instance_seed_index;
  j["returned"] = trace.returned;
  j["returnedLower"] = trace.returned_lower;
  j["certified"] = trace.certified;
  j["totalSamples"] = trace.total_samples;
  auto rounds = nlohmann::ordered_json::array();
  for (const auto& round : trace.rounds) {
    auto arms = nlohmann::ordered_json::array();
    for (const auto& arm : round) {
      arms.push_back({{"anchor", arm.anchor},
                      {"samples", arm.samples},
                      {"mean", arm.mean},
                      {"lower", arm.lower},
                      {"upper", arm.upper}});
    }
    rounds.push_back(std::move(arms));
  }
  j["rounds"] = std::move(rounds);
  return j;
}

}  // namespace scendbg::anchors
