#include "scendbg/whitebox.hpp"

#include <algorithm>
#include <functional>

#include "scendbg/errors.hpp"

namespace scendbg::whitebox {

std::vector<bool> binarize(std::span<const double> activations) {
  std::vector<bool> bits(activations.size());
  for (std::size_t i = 0; i < activations.size(); ++i) bits[i] = activations[i] >= 0.0;
  return bits;
}

bool satisfies(const ActivationPattern& pattern, std::span<const double> activations) {
  for (const auto& [channel, active] : pattern.constraints) {
    auto c = static_cast<std::size_t>(channel);
    if (c >= activations.size()) return false;
    if ((activations[c] >= 0.0) != active) return false;
  }
  return true;
}

ActivationPattern mine_pattern(std::span<const eval::LabeledExample> data, Label target,
                               const trees::TreeConfig& cfg, std::uint64_t seed) {
  if (data.empty()) throw EmptyData("cannot mine a pattern from an empty dataset");
  std::size_t k = 0;
  for (const auto& ex : data) {
    if (!ex.activations) throw NoActivations("example lacks activations");
    if (k == 0)
      k = ex.activations->size();
    else if (ex.activations->size() != k)
      throw NoActivations("inconsistent activation lengths");
  }

  ActivationPattern pattern;
  pattern.source_label = target;

  int target_total = 0;
  for (const auto& ex : data)
    if (ex.label() == target) ++target_total;
  if (target_total == 0 || k == 0) return pattern;  // no target leaf possible

  // channels as 0/1 numeric features
  trees::Dataset d;
  d.rows = data.size();
  d.class_names = {"correct", "incorrect"};
  d.info.resize(k);
  d.numeric.resize(k);
  d.codes.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    d.info[c].name = "ch" + std::to_string(c);
    d.numeric[c].reserve(data.size());
  }
  for (const auto& ex : data) {
    auto bits = binarize(*ex.activations);
    for (std::size_t c = 0; c < k; ++c) d.numeric[c].push_back(bits[c] ? 1.0 : 0.0);
    d.labels.push_back(ex.label() == Label::Correct ? 0 : 1);
  }

  trees::DecisionTree tree = trees::fit_tree(d, cfg, seed);
  int target_code = target == Label::Correct ? 0 : 1;

  double best_support = -1.0, best_precision = -1.0;
  std::vector<std::pair<int, bool>> path, best_path;
  bool found = false;

  std::function<void(int)> walk = [&](int id) {
    const trees::TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    if (node.is_leaf) {
      if (node.label != target_code) return;
      int leaf_target = node.counts[static_cast<std::size_t>(target_code)];
      int leaf_total = 0;
      for (int c : node.counts) leaf_total += c;
      double support = static_cast<double>(leaf_target) / target_total;
      double precision = leaf_total > 0 ? static_cast<double>(leaf_target) / leaf_total : 0.0;
      if (support > best_support ||
          (support == best_support && precision > best_precision)) {
        best_support = support;
        best_precision = precision;
        best_path = path;
        found = true;
      }
      return;
    }
    // splits over 0/1 channels: left means inactive, right active
    path.emplace_back(node.feature, false);
    walk(node.left);
    path.back().second = true;
    walk(node.right);
    path.pop_back();
  };
  walk(0);

  if (!found) return pattern;
  // a channel appears at most once along a path; keep first occurrence
  std::vector<bool> seen(k, false);
  for (const auto& [channel, active] : best_path) {
    if (seen[static_cast<std::size_t>(channel)]) continue;
    seen[static_cast<std::size_t>(channel)] = true;
    pattern.constraints.emplace_back(channel, active);
  }
  std::sort(pattern.constraints.begin(), pattern.constraints.end());
  pattern.support = best_support;
  return pattern;
}

void augment_labels(std::span<eval::LabeledExample> data, const ActivationPattern& correct,
                    const ActivationPattern& incorrect) {
  for (auto& ex : data) {
    if (!ex.activations) throw NoActivations("example lacks activations");
    if (ex.label() == Label::Correct)
      ex.augmented = satisfies(correct, *ex.activations) ? AugLabel::CorrectDP
                                                         : AugLabel::CorrectUnlabelled;
    else
      ex.augmented = satisfies(incorrect, *ex.activations) ? AugLabel::IncorrectDP
                                                           : AugLabel::IncorrectUnlabelled;
  }
}

nlohmann::ordered_json to_json(const ActivationPattern& pattern) {
  nlohmann::ordered_json j;
  j["kind"] = "activation-pattern";
  j["label"] = to_string(pattern.source_label);
  j["support"] = pattern.support;
  auto constraints = nlohmann::ordered_json::array();
  for (const auto& [channel, active] : pattern.constraints)
    constraints.push_back({{"channel", channel}, {"active", active}});
  j["constraints"] = std::move(constraints);
  return j;
}

}  // namespace scendbg::whitebox
