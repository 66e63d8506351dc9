#include "scendbg/evaluator.hpp"

#include <algorithm>

namespace scendbg::eval {

double iou(const world::BoundingBox& a, const world::BoundingBox& b) {
  double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  double inter = ix * iy;
  double area_a = (a.x_max - a.x_min) * (a.y_max - a.y_min);
  double area_b = (b.x_max - b.x_min) * (b.y_max - b.y_min);
  double uni = area_a + area_b - inter;
  return uni <= 0.0 ? 0.0 : inter / uni;
}

ImageEvaluation match_and_score(std::span<const world::BoundingBox> ground_truth,
                                std::span<const world::Detection> detections,
                                double iou_threshold) {
  struct Pair {
    double iou;
    std::size_t gt;
    std::size_t det;
  };
  std::vector<Pair> pairs;
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    for (std::size_t d = 0; d < detections.size(); ++d) {
      double v = iou(ground_truth[g], detections[d].box);
      if (v > iou_threshold) pairs.push_back({v, g, d});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.gt != b.gt) return a.gt < b.gt;
    return a.det < b.det;
  });

  std::vector<bool> gt_used(ground_truth.size(), false);
  std::vector<bool> det_used(detections.size(), false);
  int tp = 0;
  for (const auto& p : pairs) {
    if (gt_used[p.gt] || det_used[p.det]) continue;
    gt_used[p.gt] = det_used[p.det] = true;
    ++tp;
  }

  ImageEvaluation e;
  e.tp = tp;
  e.fp = static_cast<int>(detections.size()) - tp;
  e.fn = static_cast<int>(ground_truth.size()) - tp;
  if (e.tp == 0 && e.fp == 0 && e.fn == 0) {
    // empty scene, nothing predicted: the detector is right
    e.precision = e.recall = e.f1 = 1.0;
    return e;
  }
  e.precision = (e.tp + e.fp) == 0 ? 0.0 : static_cast<double>(e.tp) / (e.tp + e.fp);
  if (e.tp + e.fn == 0)
    e.recall = e.fp == 0 ? 1.0 : 0.0;
  else
    e.recall = static_cast<double>(e.tp) / (e.tp + e.fn);
  e.f1 = (e.precision + e.recall) == 0.0
             ? 0.0
             : 2.0 * e.precision * e.recall / (e.precision + e.recall);
  return e;
}

Label assign_label(const ImageEvaluation& evaluation, double f1_threshold) {
  return evaluation.f1 > f1_threshold ? Label::Correct : Label::Incorrect;
}

}  // namespace scendbg::eval
