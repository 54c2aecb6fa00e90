#ifndef ION_EVAL_HPP_
#define ION_EVAL_HPP_

#include <map>
#include <vector>

#include "ion/boxes.hpp"

namespace ion {

enum class DetMatch { kTruePositive, kFalsePositive, kIgnored };

struct MatchResult {
  std::vector<int> order;        // detection indices sorted by descending score
  std::vector<DetMatch> flags;   // aligned with `order`
  int num_gt = 0;                // non-difficult ground truths
};

// Greedy matching in score order: each detection takes the highest-IoU
// unmatched non-difficult ground truth of its class/image at or above
// iou_thresh; duplicates are false positives. Difficult ground truths never
// count as misses and never get consumed -- detections whose only overlap
// is difficult are ignored outright.
MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<GroundTruthObject>& gts,
                             double iou_thresh);

// All-points interpolated area under the precision envelope. flags must be in
// descending-score order; ignored entries are skipped.
double average_precision(const std::vector<DetMatch>& flags, int num_gt);

// The ten COCO thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> coco_iou_thresholds();

struct EvalResult {
  std::vector<double> iou_thresholds;
  std::map<int, std::vector<double>> per_class_ap;  // class -> AP per threshold
  double map50 = 0.0;
  double map_coco = 0.0;
  double average_recall = 0.0;
  double ap_small = 0.0, ap_medium = 0.0, ap_large = 0.0;
  double ar_small = 0.0, ar_medium = 0.0, ar_large = 0.0;
};

// Size buckets on ground-truth area (COCO convention): small <= 32^2,
// medium (32^2, 96^2], large > 96^2.
constexpr double kSmallAreaMax = 32.0 * 32.0;
constexpr double kMediumAreaMax = 96.0 * 96.0;

// mAP at each threshold over classes 1..num_classes (classes with at least
// one countable ground truth); fills the AP part of EvalResult.
EvalResult coco_map(const std::vector<Detection>& dets, const std::vector<GroundTruthObject>& gts, int num_classes);

// Recall averaged over the ten thresholds under a per-image detection cap.
double average_recall(const std::vector<Detection>& dets, const std::vector<GroundTruthObject>& gts, int num_classes,
                      int max_dets);

// coco_map + average recall + size-stratified AP/AR in one report.
EvalResult evaluate_all(const std::vector<Detection>& dets, const std::vector<GroundTruthObject>& gts,
                        int num_classes, int max_dets = 100);

}  // namespace ion

#endif  // ION_EVAL_HPP_
