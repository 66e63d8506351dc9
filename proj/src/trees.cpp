#include "scendbg/trees.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "scendbg/dsl/parser.hpp"
#include "scendbg/errors.hpp"
#include "scendbg/rng.hpp"

namespace scendbg::trees {

Dataset build_dataset(const dsl::FeatureSchema& schema,
                      std::span<const eval::LabeledExample> examples, bool augmented) {
  Dataset d;
  d.rows = examples.size();
  if (augmented)
    d.class_names = {"correct-dp", "correct-unlabelled", "incorrect-dp", "incorrect-unlabelled"};
  else
    d.class_names = {"correct", "incorrect"};

  d.info.resize(schema.size());
  d.numeric.resize(schema.size());
  d.codes.resize(schema.size());
  for (std::size_t f = 0; f < schema.size(); ++f) {
    const auto& fd = schema.at(f);
    d.info[f].name = fd.name;
    d.info[f].categorical = fd.kind == dsl::FeatureKind::Categorical;
    if (d.info[f].categorical) {
      d.info[f].categories = fd.categories;
      d.codes[f].reserve(examples.size());
    } else {
      d.numeric[f].reserve(examples.size());
    }
  }

  for (const auto& ex : examples) {
    for (std::size_t f = 0; f < schema.size(); ++f) {
      const Value& v = ex.features.values.at(f);
      if (d.info[f].categorical) {
        const auto& cats = d.info[f].categories;
        auto it = std::find(cats.begin(), cats.end(), as_string(v));
        if (it == cats.end())
          throw Error("value \"" + as_string(v) + "\" outside the domain of " + d.info[f].name);
        d.codes[f].push_back(static_cast<int>(it - cats.begin()));
      } else {
        d.numeric[f].push_back(as_number(v));
      }
    }
    if (augmented) {
      if (!ex.augmented) throw Error("example lacks an augmented label");
      d.labels.push_back(static_cast<int>(*ex.augmented));
    } else {
      d.labels.push_back(ex.label() == Label::Correct ? 0 : 1);
    }
  }
  return d;
}

std::map<std::string, double> balanced_label_weights(const Dataset& data) {
  std::vector<int> counts(data.class_names.size(), 0);
  for (int l : data.labels) ++counts[static_cast<std::size_t>(l)];
  std::map<std::string, double> weights;
  auto k = static_cast<double>(data.class_names.size());
  for (std::size_t c = 0; c < data.class_names.size(); ++c) {
    weights[data.class_names[c]] =
        counts[c] > 0 ? static_cast<double>(data.rows) / (k * counts[c]) : 1.0;
  }
  return weights;
}

namespace {

struct ClassCounts {
  std::vector<double> weighted;
  std::vector<int> raw;
  double total_weight = 0.0;

  explicit ClassCounts(std::size_t k) : weighted(k, 0.0), raw(k, 0) {}

  void add(int label, double w) {
    weighted[static_cast<std::size_t>(label)] += w;
    raw[static_cast<std::size_t>(label)] += 1;
    total_weight += w;
  }

  /// Gini risk: W * (1 - sum p_k^2) = W - sum wc_k^2 / W.
  double risk() const {
    if (total_weight <= 0.0) return 0.0;
    double sq = 0.0;
    for (double w : weighted) sq += w * w;
    return total_weight - sq / total_weight;
  }

  int majority() const {
    int best = 0;
    for (int k = 1; k < static_cast<int>(weighted.size()); ++k)
      if (weighted[static_cast<std::size_t>(k)] >= weighted[static_cast<std::size_t>(best)])
        best = k;
    return best;
  }
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  std::vector<int> left_categories;
  double gain = -1.0;
};

constexpr double kGainTolerance = 1e-12;

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const TreeConfig& cfg, std::uint64_t seed)
      : data_(data), cfg_(cfg), rng_(seed) {
    if (data.rows == 0) throw EmptyData("cannot fit a tree on an empty dataset");
    class_weights_.resize(data.class_names.size(), 1.0);
    for (std::size_t c = 0; c < data.class_names.size(); ++c) {
      auto it = cfg.label_weights.find(data.class_names[c]);
      if (it != cfg.label_weights.end()) {
        if (it->second <= 0.0) throw ConfigError("label weights must be positive");
        class_weights_[c] = it->second;
      }
    }
  }

  DecisionTree build() {
    std::vector<std::size_t> rows(data_.rows);
    std::iota(rows.begin(), rows.end(), 0);
    root_risk_ = count(rows).risk();
    tree_.class_names = data_.class_names;
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  double weight_of(std::size_t row) const {
    return class_weights_[static_cast<std::size_t>(data_.labels[row])];
  }

  ClassCounts count(const std::vector<std::size_t>& rows) const {
    ClassCounts c(data_.class_names.size());
    for (std::size_t r : rows) c.add(data_.labels[r], weight_of(r));
    return c;
  }

  int new_node(const ClassCounts& counts) {
    TreeNode node;
    node.label = counts.majority();
    node.weighted_counts = counts.weighted;
    node.counts = counts.raw;
    tree_.nodes.push_back(std::move(node));
    return static_cast<int>(tree_.nodes.size()) - 1;
  }

  int grow(std::vector<std::size_t> rows, int depth) {
    ClassCounts counts = count(rows);
    int node_id = new_node(counts);

    bool pure = counts.risk() <= 0.0;
    if (pure || depth >= cfg_.max_depth || counts.total_weight < cfg_.min_split ||
        root_risk_ <= 0.0)
      return node_id;

    SplitChoice split = choose_split(rows, counts);
    if (split.feature < 0) return node_id;
    if (split.gain / root_risk_ < cfg_.complexity_penalty) return node_id;

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) {
      bool go_left;
      if (!split.left_categories.empty()) {
        go_left = std::binary_search(split.left_categories.begin(), split.left_categories.end(),
                                     data_.codes[static_cast<std::size_t>(split.feature)][r]);
      } else {
        go_left = data_.numeric[static_cast<std::size_t>(split.feature)][r] <= split.threshold;
      }
      (go_left ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    int left_id = grow(std::move(left_rows), depth + 1);
    int right_id = grow(std::move(right_rows), depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(node_id)];
    node.is_leaf = false;
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left_categories = std::move(split.left_categories);
    node.left = left_id;
    node.right = right_id;
    return node_id;
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> all(data_.features());
    std::iota(all.begin(), all.end(), 0);
    int subset = cfg_.feature_subset_size;
    if (subset <= 0 || static_cast<std::size_t>(subset) >= all.size()) return all;
    for (std::size_t i = 0; i < static_cast<std::size_t>(subset); ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng_.next_below(all.size() - i));
      std::swap(all[i], all[j]);
    }
    all.resize(static_cast<std::size_t>(subset));
    std::sort(all.begin(), all.end());
    return all;
  }

  SplitChoice choose_split(const std::vector<std::size_t>& rows, const ClassCounts& parent) {
    std::vector<SplitChoice> best;
    double best_gain = -1.0;
    auto consider = [&](SplitChoice cand) {
      if (cand.gain <= 0.0) return;
      if (cand.gain > best_gain + kGainTolerance) {
        best_gain = cand.gain;
        best.clear();
        best.push_back(std::move(cand));
      } else if (cand.gain >= best_gain - kGainTolerance) {
        best.push_back(std::move(cand));
      }
    };

    for (std::size_t f : candidate_features()) {
      if (data_.info[f].categorical)
        categorical_splits(f, rows, parent, consider);
      else
        numeric_splits(f, rows, parent, consider);
    }
    if (best.empty()) return {};
    if (best.size() == 1) return std::move(best.front());
    return std::move(best[rng_.next_below(best.size())]);
  }

  template <class Consider>
  void numeric_splits(std::size_t f, const std::vector<std::size_t>& rows,
                      const ClassCounts& parent, Consider&& consider) {
    const auto& col = data_.numeric[f];
    std::vector<std::size_t> order(rows);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return col[a] < col[b]; });

    ClassCounts left(data_.class_names.size());
    double parent_risk = parent.risk();
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      std::size_t r = order[i];
      left.add(data_.labels[r], weight_of(r));
      double v = col[r];
      double next = col[order[i + 1]];
      if (v == next) continue;

      double right_weight = parent.total_weight - left.total_weight;
      if (left.total_weight < cfg_.min_bucket || right_weight < cfg_.min_bucket) continue;

      ClassCounts right(data_.class_names.size());
      for (std::size_t k = 0; k < right.weighted.size(); ++k) {
        right.weighted[k] = parent.weighted[k] - left.weighted[k];
        right.raw[k] = parent.raw[k] - left.raw[k];
      }
      right.total_weight = right_weight;

      SplitChoice cand;
      cand.feature = static_cast<int>(f);
      cand.threshold = v + (next - v) / 2.0;  // midpoint
      cand.gain = parent_risk - left.risk() - right.risk();
      consider(std::move(cand));
    }
  }

  template <class Consider>
  void categorical_splits(std::size_t f, const std::vector<std::size_t>& rows,
                          const ClassCounts& parent, Consider&& consider) {
    const auto& col = data_.codes[f];
    std::map<int, ClassCounts> per_cat;
    for (std::size_t r : rows) {
      auto [it, inserted] = per_cat.try_emplace(col[r], data_.class_names.size());
      it->second.add(data_.labels[r], weight_of(r));
    }
    if (per_cat.size() < 2) return;

    std::vector<int> cats;
    cats.reserve(per_cat.size());
    for (const auto& [code, counts] : per_cat) cats.push_back(code);
    std::size_t m = cats.size();
    double parent_risk = parent.risk();

    auto evaluate_subset = [&](std::vector<int> left_cats) {
      ClassCounts left(data_.class_names.size());
      for (int code : left_cats) {
        const ClassCounts& cc = per_cat.at(code);
        for (std::size_t k = 0; k < left.weighted.size(); ++k) {
          left.weighted[k] += cc.weighted[k];
          left.raw[k] += cc.raw[k];
        }
        left.total_weight += cc.total_weight;
      }
      double right_weight = parent.total_weight - left.total_weight;
      if (left.total_weight < cfg_.min_bucket || right_weight < cfg_.min_bucket) return;
      ClassCounts right(data_.class_names.size());
      for (std::size_t k = 0; k < right.weighted.size(); ++k) {
        right.weighted[k] = parent.weighted[k] - left.weighted[k];
        right.raw[k] = parent.raw[k] - left.raw[k];
      }
      right.total_weight = right_weight;

      SplitChoice cand;
      cand.feature = static_cast<int>(f);
      cand.left_categories = std::move(left_cats);
      std::sort(cand.left_categories.begin(), cand.left_categories.end());
      cand.gain = parent_risk - left.risk() - right.risk();
      consider(std::move(cand));
    };

    if (m <= 12) {
      // all 2^(m-1) - 1 unordered two-way partitions; cats[0] stays right
      std::uint64_t limit = 1ULL << (m - 1);
      for (std::uint64_t mask = 1; mask < limit; ++mask) {
        std::vector<int> left_cats;
        for (std::size_t b = 0; b + 1 < m; ++b)
          if (mask & (1ULL << b)) left_cats.push_back(cats[b + 1]);
        evaluate_subset(std::move(left_cats));
      }
    } else {
      for (int code : cats) evaluate_subset({code});
    }
  }

  const Dataset& data_;
  const TreeConfig& cfg_;
  RngStream rng_;
  std::vector<double> class_weights_;
  DecisionTree tree_;
  double root_risk_ = 0.0;
};

}  // namespace

DecisionTree fit_tree(const Dataset& data, const TreeConfig& cfg, std::uint64_t seed) {
  if (cfg.min_bucket > cfg.min_split) throw ConfigError("minBucket must not exceed minSplit");
  if (cfg.complexity_penalty < 0.0) throw ConfigError("complexity penalty must be >= 0");
  return TreeBuilder(data, cfg, seed).build();
}

Encoder::Encoder(const dsl::FeatureSchema& schema) : schema_(&schema) {
  codes_.resize(schema.size());
  for (std::size_t f = 0; f < schema.size(); ++f) {
    const auto& fd = schema.at(f);
    for (std::size_t c = 0; c < fd.categories.size(); ++c)
      codes_[f].emplace(fd.categories[c], static_cast<int>(c));
  }
}

EncodedRow Encoder::encode(const FeatureVector& f) const {
  EncodedRow row;
  row.nums.resize(schema_->size(), 0.0);
  row.cat_codes.resize(schema_->size(), -1);
  for (std::size_t i = 0; i < schema_->size(); ++i) {
    const Value& v = f.values.at(i);
    if (schema_->at(i).kind == dsl::FeatureKind::Categorical) {
      auto it = codes_[i].find(as_string(v));
      if (it == codes_[i].end())
        throw Error("value \"" + as_string(v) + "\" outside the domain of " +
                    schema_->at(i).name);
      row.cat_codes[i] = it->second;
    } else {
      row.nums[i] = as_number(v);
    }
  }
  return row;
}

std::vector<rules::Rule> extract_rules(const DecisionTree& tree, const Dataset& data,
                                       const std::string& target_label) {
  int target = -1;
  for (std::size_t c = 0; c < tree.class_names.size(); ++c)
    if (tree.class_names[c] == target_label) target = static_cast<int>(c);
  if (target < 0) throw Error("unknown target label: " + target_label);

  std::vector<rules::Rule> out;
  std::vector<rules::Predicate> path;

  auto edge_predicate = [&](const TreeNode& node, bool left) {
    rules::Predicate p;
    const FeatureInfo& info = data.info[static_cast<std::size_t>(node.feature)];
    p.feature = info.name;
    if (!node.left_categories.empty()) {
      rules::Membership m;
      if (left) {
        for (int code : node.left_categories)
          m.values.push_back(info.categories[static_cast<std::size_t>(code)]);
      } else {
        for (std::size_t c = 0; c < info.categories.size(); ++c)
          if (!std::binary_search(node.left_categories.begin(), node.left_categories.end(),
                                  static_cast<int>(c)))
            m.values.push_back(info.categories[c]);
      }
      std::sort(m.values.begin(), m.values.end());
      p.constraint = std::move(m);
    } else {
      rules::NumericRange r;
      if (left) {
        r.hi = node.threshold;  // x <= t
      } else {
        r.lo = node.threshold;  // x > t
        r.lo_strict = true;
      }
      p.constraint = r;
    }
    return p;
  };

  // merge per-feature path constraints without needing a schema
  auto merge_path = [](const std::vector<rules::Predicate>& preds) {
    std::map<std::string, std::size_t> seen;
    std::vector<rules::Predicate> merged;
    for (const auto& p : preds) {
      auto it = seen.find(p.feature);
      if (it == seen.end()) {
        seen.emplace(p.feature, merged.size());
        merged.push_back(p);
        continue;
      }
      auto& acc = merged[it->second];
      if (const auto* range = std::get_if<rules::NumericRange>(&p.constraint)) {
        auto& dst = std::get<rules::NumericRange>(acc.constraint);
        if (range->lo && (!dst.lo || *range->lo >= *dst.lo)) {
          dst.lo = range->lo;
          dst.lo_strict = range->lo_strict;
        }
        if (range->hi && (!dst.hi || *range->hi <= *dst.hi)) {
          dst.hi = range->hi;
          dst.hi_strict = range->hi_strict;
        }
      } else {
        const auto& src = std::get<rules::Membership>(p.constraint);
        auto& dst = std::get<rules::Membership>(acc.constraint);
        std::vector<std::string> inter;
        std::set_intersection(dst.values.begin(), dst.values.end(), src.values.begin(),
                              src.values.end(), std::back_inserter(inter));
        dst.values = std::move(inter);
      }
    }
    return merged;
  };

  std::function<void(int)> walk = [&](int id) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    if (node.is_leaf) {
      if (node.label == target) {
        rules::Rule rule;
        rule.predicates = merge_path(path);
        rule.target = target_label;
        out.push_back(std::move(rule));
      }
      return;
    }
    path.push_back(edge_predicate(node, true));
    walk(node.left);
    path.back() = edge_predicate(node, false);
    walk(node.right);
    path.pop_back();
  };
  walk(0);
  return out;
}

RandomForest fit_forest(const Dataset& data, const ForestConfig& cfg, std::uint64_t seed) {
  if (data.rows == 0) throw EmptyData("cannot fit a forest on an empty dataset");
  if (cfg.num_trees < 1) throw ConfigError("numTrees must be >= 1");

  RandomForest forest;
  forest.class_names = data.class_names;
  forest.trees.resize(static_cast<std::size_t>(cfg.num_trees));

  int subset = cfg.feature_subset_size;
  if (subset < 0)
    subset = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(data.features()))));

  for (int t = 0; t < cfg.num_trees; ++t) {
    RngStream rng = RngStream::substream(seed, static_cast<std::uint64_t>(t));
    Dataset sample;
    const Dataset* training = &data;
    if (cfg.bootstrap) {
      sample.info = data.info;
      sample.class_names = data.class_names;
      sample.rows = data.rows;
      sample.numeric.resize(data.features());
      sample.codes.resize(data.features());
      std::vector<std::size_t> picks(data.rows);
      for (auto& p : picks) p = static_cast<std::size_t>(rng.next_below(data.rows));
      for (std::size_t f = 0; f < data.features(); ++f) {
        if (data.info[f].categorical) {
          sample.codes[f].reserve(picks.size());
          for (std::size_t p : picks) sample.codes[f].push_back(data.codes[f][p]);
        } else {
          sample.numeric[f].reserve(picks.size());
          for (std::size_t p : picks) sample.numeric[f].push_back(data.numeric[f][p]);
        }
      }
      sample.labels.reserve(picks.size());
      for (std::size_t p : picks) sample.labels.push_back(data.labels[p]);
      training = &sample;
    }
    TreeConfig tree_cfg = cfg.tree;
    tree_cfg.feature_subset_size = subset;
    forest.trees[static_cast<std::size_t>(t)] = fit_tree(*training, tree_cfg, rng.derive("tree"));
  }
  return forest;
}

nlohmann::ordered_json to_json(const DecisionTree& tree) {
  nlohmann::ordered_json j;
  j["classes"] = tree.class_names;
  auto nodes = nlohmann::ordered_json::array();
  for (const auto& n : tree.nodes) {
    nlohmann::ordered_json e;
    e["leaf"] = n.is_leaf;
    e["label"] = n.label;
    e["counts"] = n.counts;
    e["weightedCounts"] = n.weighted_counts;
    if (!n.is_leaf) {
      e["feature"] = n.feature;
      if (!n.left_categories.empty())
        e["leftCategories"] = n.left_categories;
      else
        e["threshold"] = n.threshold;
      e["left"] = n.left;
      e["right"] = n.right;
    }
    nodes.push_back(std::move(e));
  }
  j["nodes"] = std::move(nodes);
  return j;
}

DecisionTree tree_from_json(const nlohmann::json& j) {
  DecisionTree tree;
  tree.class_names = j.at("classes").get<std::vector<std::string>>();
  for (const auto& e : j.at("nodes")) {
    TreeNode n;
    n.is_leaf = e.at("leaf").get<bool>();
    n.label = e.at("label").get<int>();
    n.counts = e.value("counts", std::vector<int>{});
    n.weighted_counts = e.value("weightedCounts", std::vector<double>{});
    if (!n.is_leaf) {
      n.feature = e.at("feature").get<int>();
      if (e.contains("leftCategories"))
        n.left_categories = e.at("leftCategories").get<std::vector<int>>();
      else
        n.threshold = e.at("threshold").get<double>();
      n.left = e.at("left").get<int>();
      n.right = e.at("right").get<int>();
    }
    tree.nodes.push_back(std::move(n));
  }
  return tree;
}

nlohmann::ordered_json to_json(const RandomForest& forest) {
  nlohmann::ordered_json j;
  j["classes"] = forest.class_names;
  auto trees = nlohmann::ordered_json::array();
  for (const auto& t : forest.trees) trees.push_back(to_json(t));
  j["trees"] = std::move(trees);
  return j;
}

std::string to_dot(const DecisionTree& tree, const Dataset& data) {
  std::string out = "digraph tree {\n  node [shape=box];\n";
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& n = tree.nodes[i];
    out += "  n" + std::to_string(i) + " [label=\"";
    if (n.is_leaf) {
      out += tree.class_names[static_cast<std::size_t>(n.label)];
    } else {
      const FeatureInfo& info = data.info[static_cast<std::size_t>(n.feature)];
      if (!n.left_categories.empty()) {
        out += info.name + " in {";
        for (std::size_t c = 0; c < n.left_categories.size(); ++c) {
          if (c) out += ",";
          out += info.categories[static_cast<std::size_t>(n.left_categories[c])];
        }
        out += "}";
      } else {
        out += info.name + " <= " + dsl::format_number(n.threshold);
      }
    }
    out += "\"];\n";
    if (!n.is_leaf) {
      out += "  n" + std::to_string(i) + " -> n" + std::to_string(n.left) + " [label=\"yes\"];\n";
      out += "  n" + std::to_string(i) + " -> n" + std::to_string(n.right) + " [label=\"no\"];\n";
    }
  }
  out += "}\n";
  return out;
}

}  // namespace scendbg::trees
