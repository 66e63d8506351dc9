#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "scendbg/dsl/schema.hpp"
#include "scendbg/evaluator.hpp"
#include "scendbg/rules.hpp"
#include "scendbg/value.hpp"

namespace scendbg::trees {

struct TreeConfig {
  double min_split = 20.0;   // minimum (weighted) node size to attempt a split
  double min_bucket = 7.0;   // minimum (weighted) child size
  double complexity_penalty = 0.01;  // split accepted iff gain / root risk >= cp
  int max_depth = 30;
  std::map<std::string, double> label_weights;  // class name -> weight, default 1
  int feature_subset_size = 0;                  // 0 = consider every feature
};

struct FeatureInfo {
  std::string name;
  bool categorical = false;
  std::vector<std::string> categories;  // categorical only; codes index into this
};

/// Column-major training table. Codes index FeatureInfo::categories.
struct Dataset {
  std::vector<FeatureInfo> info;
  std::vector<std::vector<double>> numeric;  // per feature; empty when categorical
  std::vector<std::vector<int>> codes;       // per feature; empty when numeric
  std::vector<int> labels;                   // class ids into class_names
  std::vector<std::string> class_names;
  std::size_t rows = 0;

  std::size_t features() const { return info.size(); }
};

/// Binary labels -> {"correct", "incorrect"}; augmented -> the four
/// decision-pattern sub-labels. Throws NoActivations-like errors upstream;
/// here augmented examples must carry `augmented`.
Dataset build_dataset(const dsl::FeatureSchema& schema,
                      std::span<const eval::LabeledExample> examples, bool augmented);

/// w_k = rows / (K * n_k) over classes present; absent classes get 1.
std::map<std::string, double> balanced_label_weights(const Dataset& data);

struct TreeNode {
  bool is_leaf = true;
  int feature = -1;
  double threshold = 0.0;            // numeric: x <= threshold goes left
  std::vector<int> left_categories;  // categorical: code in set goes left (sorted)
  int left = -1;
  int right = -1;
  int label = 0;
  std::vector<double> weighted_counts;
  std::vector<int> counts;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // root at index 0
  std::vector<std::string> class_names;
};

/// Recursive binary partitioning maximizing weighted Gini decrease; the seed
/// only breaks ties among equal-gain splits.
DecisionTree fit_tree(const Dataset& data, const TreeConfig& cfg, std::uint64_t seed);

/// Accessor for one dataset row.
struct DatasetRow {
  const Dataset* data;
  std::size_t row;
  double numeric(std::size_t f) const { return data->numeric[f][row]; }
  int code(std::size_t f) const { return data->codes[f][row]; }
};

/// Feature vector encoded for tree traversal.
struct EncodedRow {
  std::vector<double> nums;
  std::vector<int> cat_codes;
  double numeric(std::size_t f) const { return nums[f]; }
  int code(std::size_t f) const { return cat_codes[f]; }
};

class Encoder {
 public:
  explicit Encoder(const dsl::FeatureSchema& schema);
  EncodedRow encode(const FeatureVector& f) const;
  const dsl::FeatureSchema& schema() const { return *schema_; }

 private:
  const dsl::FeatureSchema* schema_;
  std::vector<std::unordered_map<std::string, int>> codes_;
};

template <class Row>
int predict_class(const DecisionTree& tree, const Row& row) {
  int n = 0;
  while (!tree.nodes[static_cast<std::size_t>(n)].is_leaf) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(n)];
    bool go_left;
    if (!node.left_categories.empty()) {
      int code = row.code(static_cast<std::size_t>(node.feature));
      go_left = std::binary_search(node.left_categories.begin(), node.left_categories.end(), code);
    } else {
      go_left = row.numeric(static_cast<std::size_t>(node.feature)) <= node.threshold;
    }
    n = go_left ? node.left : node.right;
  }
  return tree.nodes[static_cast<std::size_t>(n)].label;
}

/// One rule per leaf predicting `target_label`; path decisions conjoined,
/// per-feature intervals merged.
std::vector<rules::Rule> extract_rules(const DecisionTree& tree, const Dataset& data,
                                       const std::string& target_label);

struct ForestConfig {
  int num_trees = 100;
  bool bootstrap = true;
  int feature_subset_size = -1;  // -1: ceil(sqrt(#features))
  TreeConfig tree;
};

struct RandomForest {
  std::vector<DecisionTree> trees;
  std::vector<std::string> class_names;
};

RandomForest fit_forest(const Dataset& data, const ForestConfig& cfg, std::uint64_t seed);

/// Unweighted majority vote; ties go to the higher class index (for binary
/// labels that is "incorrect").
template <class Row>
int predict_class(const RandomForest& forest, const Row& row) {
  std::vector<int> votes(forest.class_names.size(), 0);
  for (const auto& tree : forest.trees) ++votes[static_cast<std::size_t>(predict_class(tree, row))];
  int best = 0;
  for (int k = 1; k < static_cast<int>(votes.size()); ++k)
    if (votes[static_cast<std::size_t>(k)] >= votes[static_cast<std::size_t>(best)]) best = k;
  return best;
}

nlohmann::ordered_json to_json(const DecisionTree& tree);
DecisionTree tree_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const RandomForest& forest);
std::string to_dot(const DecisionTree& tree, const Dataset& data);

}  // namespace scendbg::trees
