#pragma once

#include <optional>
#include <span>
#include <vector>

#include "scendbg/value.hpp"
#include "scendbg/world.hpp"

namespace scendbg::eval {

struct ImageEvaluation {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Label label = Label::Incorrect;
};

/// Intersection-over-union of two axis-aligned boxes, in [0, 1].
double iou(const world::BoundingBox& a, const world::BoundingBox& b);

/// Greedy matching: candidate (gt, detection) pairs sorted by IoU descending
/// (ties: lower gt index, then lower detection index); a pair is accepted iff
/// IoU > iou_threshold and neither member is matched yet. Unmatched
/// detections (duplicates included) count as false positives, unmatched
/// ground truths as false negatives. An empty scene with no detections
/// scores precision = recall = f1 = 1.
ImageEvaluation match_and_score(std::span<const world::BoundingBox> ground_truth,
                                std::span<const world::Detection> detections,
                                double iou_threshold = 0.5);

/// Correct iff f1 is strictly greater than the threshold.
Label assign_label(const ImageEvaluation& evaluation, double f1_threshold = 0.8);

inline ImageEvaluation evaluate_image(std::span<const world::BoundingBox> ground_truth,
                                      std::span<const world::Detection> detections,
                                      double iou_threshold = 0.5, double f1_threshold = 0.8) {
  ImageEvaluation e = match_and_score(ground_truth, detections, iou_threshold);
  e.label = assign_label(e, f1_threshold);
  return e;
}

struct LabeledExample {
  FeatureVector features;
  ImageEvaluation evaluation;
  std::optional<std::vector<double>> activations;
  std::optional<AugLabel> augmented;

  Label label() const { return evaluation.label; }
};

}  // namespace scendbg::eval
