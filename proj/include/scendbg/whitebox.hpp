#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scendbg/evaluator.hpp"
#include "scendbg/trees.hpp"
#include "scendbg/value.hpp"

namespace scendbg::whitebox {

/// Bit j is set iff activation j >= 0 (zero counts as active).
std::vector<bool> binarize(std::span<const double> activations);

/// Conjunction of on/off constraints over binarized channels, with the
/// fraction of target-label examples satisfying it.
struct ActivationPattern {
  std::vector<std::pair<int, bool>> constraints;  // (channel, must_be_active)
  Label source_label = Label::Correct;
  double support = 0.0;
};

bool satisfies(const ActivationPattern& pattern, std::span<const double> activations);

/// Fits a decision tree over binarized channels against the binary labels and
/// returns the target-leaf path with the highest support (precision breaks
/// ties). No target leaf yields an empty pattern with support 0.
/// Throws NoActivations if any example lacks activations.
ActivationPattern mine_pattern(std::span<const eval::LabeledExample> data, Label target,
                               const trees::TreeConfig& cfg, std::uint64_t seed);

/// Splits each binary class into pattern / unlabelled sub-classes in place.
void augment_labels(std::span<eval::LabeledExample> data, const ActivationPattern& correct,
                    const ActivationPattern& incorrect);

nlohmann::ordered_json to_json(const ActivationPattern& pattern);

}  // namespace scendbg::whitebox
