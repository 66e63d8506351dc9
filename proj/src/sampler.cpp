#include "scendbg/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "scendbg/dsl/parser.hpp"
#include "scendbg/errors.hpp"
#include "scendbg/geometry.hpp"

namespace scendbg::sample {

namespace {

bool numeric_window(const dsl::FeatureDescriptor& fd, const FeatureConstraint* c, double& lo,
                    double& hi, bool& lo_strict, bool& hi_strict) {
  lo = fd.lo;
  hi = fd.hi;
  lo_strict = false;
  hi_strict = fd.hi_exclusive;
  if (c) {
    if (c->lo && (*c->lo > lo || (*c->lo == lo && c->lo_strict))) {
      lo = *c->lo;
      lo_strict = c->lo_strict;
    }
    if (c->hi && (*c->hi < hi || (*c->hi == hi && c->hi_strict))) {
      hi = *c->hi;
      hi_strict = c->hi_strict;
    }
  }
  return lo < hi || (lo == hi && !lo_strict && !hi_strict);
}

Value draw(const dsl::Distribution& d, const dsl::FeatureDescriptor& fd,
           const FeatureConstraint* c, RngStream& rng, bool& satisfiable) {
  satisfiable = true;
  switch (d.kind) {
    case dsl::DistKind::UniformReal: {
      double lo, hi;
      bool ls, hs;
      if (!numeric_window(fd, c, lo, hi, ls, hs) || lo >= hi) {
        satisfiable = false;
        return 0.0;
      }
      return rng.uniform_real(lo, hi);
    }
    case dsl::DistKind::UniformInt: {
      double lo, hi;
      bool ls, hs;
      if (!numeric_window(fd, c, lo, hi, ls, hs)) {
        satisfiable = false;
        return 0.0;
      }
      auto ilo = static_cast<std::int64_t>(std::ceil(lo));
      auto ihi = static_cast<std::int64_t>(std::floor(hi));
      if (ls && static_cast<double>(ilo) == lo) ++ilo;
      if (hs && static_cast<double>(ihi) == hi) --ihi;
      if (ilo > ihi) {
        satisfiable = false;
        return 0.0;
      }
      return static_cast<double>(rng.uniform_int(ilo, ihi));
    }
    case dsl::DistKind::Categorical: {
      if (c && !c->allowed.empty()) {
        std::vector<const std::string*> pool;
        for (const auto& v : d.values)
          if (std::find(c->allowed.begin(), c->allowed.end(), v) != c->allowed.end())
            pool.push_back(&v);
        if (pool.empty()) {
          satisfiable = false;
          return 0.0;
        }
        return *pool[rng.next_below(pool.size())];
      }
      return d.values[rng.next_below(d.values.size())];
    }
    case dsl::DistKind::Constant: {
      if (c) {
        if (is_number(d.constant)) {
          double v = as_number(d.constant);
          if ((c->lo && (v < *c->lo || (v == *c->lo && c->lo_strict))) ||
              (c->hi && (v > *c->hi || (v == *c->hi && c->hi_strict))))
            satisfiable = false;
        } else if (!c->allowed.empty()) {
          if (std::find(c->allowed.begin(), c->allowed.end(), as_string(d.constant)) ==
              c->allowed.end())
            satisfiable = false;
        }
      }
      return d.constant;
    }
  }
  satisfiable = false;
  return 0.0;
}

}  // namespace

ProgramSampler::ProgramSampler(const dsl::ScenarioProgram& program, SamplerConfig cfg)
    : program_(&program), cfg_(cfg), schema_(dsl::feature_schema(program)) {
  if (cfg_.max_rejections_per_sample < 1)
    throw ConfigError("maxRejectionsPerSample must be >= 1");
}

FeatureVector ProgramSampler::attempt(RngStream& rng, std::span<const FeatureConstraint> by_slot,
                                      std::int64_t seed_index) const {
  FeatureVector fv;
  fv.seed_index = seed_index;
  fv.values.resize(schema_.size(), 0.0);

  std::size_t slot = 0;
  auto next_slot = [&](const dsl::Distribution* dist, const dsl::ExprPtr* expr) {
    const auto& fd = schema_.at(slot);
    const FeatureConstraint* c =
        by_slot.empty() || by_slot[slot].feature < 0 ? nullptr : &by_slot[slot];
    if (c && c->pin) {
      fv.values[slot] = *c->pin;
    } else if (dist) {
      bool ok = true;
      fv.values[slot] = draw(*dist, fd, c, rng, ok);
      if (!ok)
        throw RejectionExhausted(seed_index, 0);  // constraint contradicts the domain
    } else {
      dsl::EvalContext ctx(schema_, std::span<const Value>(fv.values.data(), slot), cfg_.view);
      fv.values[slot] = ctx.evaluate(**expr);
    }
    ++slot;
  };

  for (const auto& p : program_->params) next_slot(&p.dist, nullptr);
  for (const auto& obj : program_->objects) {
    auto field = [&](const dsl::FieldValue& f) {
      if (std::holds_alternative<dsl::Distribution>(f))
        next_slot(&std::get<dsl::Distribution>(f), nullptr);
      else
        next_slot(nullptr, &std::get<dsl::ExprPtr>(f));
    };
    field(obj.x);
    field(obj.y);
    field(obj.heading);
    next_slot(&obj.model, nullptr);
    for (const auto& ch : obj.color) next_slot(&ch, nullptr);
  }
  return fv;
}

FeatureVector ProgramSampler::sample_constrained(RngStream& rng,
                                                 std::span<const FeatureConstraint> constraints,
                                                 const AcceptFn& accept,
                                                 std::int64_t seed_index) const {
  // Constraints indexed by slot; those on computed or derived slots become
  // post-draw checks.
  std::vector<FeatureConstraint> by_slot(schema_.declared_count());
  std::vector<FeatureConstraint> post;
  for (const auto& c : constraints) {
    if (c.feature < 0 || static_cast<std::size_t>(c.feature) >= schema_.size())
      throw UnknownFeature("constraint feature index " + std::to_string(c.feature));
    auto slot = static_cast<std::size_t>(c.feature);
    if (slot < schema_.declared_count())
      by_slot[slot] = c;
    else
      post.push_back(c);
  }
  // Expression-computed declared slots: move numeric narrowing to post checks.
  {
    std::size_t slot = 0;
    auto is_expr = [&](const dsl::FieldValue& f) {
      return std::holds_alternative<dsl::ExprPtr>(f);
    };
    slot += program_->params.size();
    for (const auto& obj : program_->objects) {
      const dsl::FieldValue* fields[3] = {&obj.x, &obj.y, &obj.heading};
      for (const auto* f : fields) {
        if (by_slot[slot].feature >= 0 && !by_slot[slot].pin && is_expr(*f)) {
          post.push_back(by_slot[slot]);
          by_slot[slot] = FeatureConstraint{};
        }
        ++slot;
      }
      slot += 4;  // model + three color channels are always sampled
    }
  }

  auto satisfies_post = [&](const FeatureVector& fv) {
    for (const auto& c : post) {
      const Value& v = fv.values[static_cast<std::size_t>(c.feature)];
      if (c.pin) {
        if (is_number(*c.pin) != is_number(v)) return false;
        if (is_number(v) ? as_number(*c.pin) != as_number(v) : as_string(*c.pin) != as_string(v))
          return false;
        continue;
      }
      if (!c.allowed.empty()) {
        if (is_number(v) || std::find(c.allowed.begin(), c.allowed.end(), as_string(v)) ==
                                c.allowed.end())
          return false;
        continue;
      }
      double x = as_number(v);
      if (c.lo && (x < *c.lo || (x == *c.lo && c.lo_strict))) return false;
      if (c.hi && (x > *c.hi || (x == *c.hi && c.hi_strict))) return false;
    }
    return true;
  };

  for (int tries = 0; tries < cfg_.max_rejections_per_sample; ++tries) {
    FeatureVector fv = attempt(rng, by_slot, seed_index);
    fv = derive_features(*program_, schema_, std::move(fv));
    dsl::EvalContext ctx(schema_, fv.values, cfg_.view);
    bool ok = true;
    for (const auto& r : program_->requires_) {
      if (!ctx.evaluate_bool(r)) {
        ok = false;
        break;
      }
    }
    if (ok && !satisfies_post(fv)) ok = false;
    if (ok && accept && !accept(fv)) ok = false;
    if (ok) return fv;
  }
  throw RejectionExhausted(seed_index, cfg_.max_rejections_per_sample);
}

FeatureVector ProgramSampler::sample_at(std::int64_t index) const {
  RngStream rng = RngStream::substream(cfg_.seed, static_cast<std::uint64_t>(index));
  return sample_constrained(rng, {}, nullptr, index);
}

std::vector<FeatureVector> ProgramSampler::sample(std::size_t n) const {
  std::vector<FeatureVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_at(static_cast<std::int64_t>(i)));
  return out;
}

std::vector<FeatureVector> sample(const dsl::ScenarioProgram& program, std::size_t n,
                                  const SamplerConfig& cfg) {
  return ProgramSampler(program, cfg).sample(n);
}

FeatureVector derive_features(const dsl::ScenarioProgram& program,
                              const dsl::FeatureSchema& schema, FeatureVector raw) {
  if (raw.values.size() < schema.declared_count())
    throw Error("feature vector is missing declared features");
  raw.values.resize(schema.size(), 0.0);
  if (program.objects.size() < 2) return raw;
  dsl::EvalContext ctx(schema, std::span<const Value>(raw.values.data(), schema.declared_count()));
  const std::string& ego = program.objects.front().name;
  std::size_t slot = schema.declared_count();
  for (std::size_t i = 1; i < program.objects.size(); ++i) {
    const std::string& other = program.objects[i].name;
    raw.values[slot++] = geom::euclid(ctx.object_number(ego, "x"), ctx.object_number(ego, "y"),
                                      ctx.object_number(other, "x"),
                                      ctx.object_number(other, "y"));
    raw.values[slot++] = geom::heading_diff_deg(ctx.object_number(ego, "heading"),
                                                ctx.object_number(other, "heading"));
  }
  return raw;
}

FeatureVector derive_features(const dsl::ScenarioProgram& program, FeatureVector raw) {
  return derive_features(program, dsl::feature_schema(program), std::move(raw));
}

FeatureVector conditional_resample(const dsl::ScenarioProgram& program, const FeatureVector& base,
                                   const std::set<std::string>& fixed, const SamplerConfig& cfg) {
  ProgramSampler sampler(program, cfg);
  const auto& schema = sampler.schema();
  std::vector<FeatureConstraint> constraints;
  std::vector<int> fixed_derived;
  for (const auto& name : fixed) {
    int idx = schema.index_of(name);
    if (idx < 0) throw UnknownFeature(name);
    if (static_cast<std::size_t>(idx) < schema.declared_count()) {
      FeatureConstraint c;
      c.feature = idx;
      c.pin = base.values.at(static_cast<std::size_t>(idx));
      constraints.push_back(std::move(c));
    } else {
      fixed_derived.push_back(idx);
    }
  }
  AcceptFn accept;
  if (!fixed_derived.empty()) {
    accept = [&base, fixed_derived](const FeatureVector& fv) {
      for (int idx : fixed_derived) {
        auto i = static_cast<std::size_t>(idx);
        if (as_number(fv.values[i]) != as_number(base.values[i])) return false;
      }
      return true;
    };
  }
  RngStream rng = RngStream::substream(cfg.seed, static_cast<std::uint64_t>(base.seed_index));
  return sampler.sample_constrained(rng, constraints, accept, base.seed_index);
}

}  // namespace scendbg::sample
