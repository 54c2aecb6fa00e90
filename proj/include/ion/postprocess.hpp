#ifndef ION_POSTPROCESS_HPP_
#define ION_POSTPROCESS_HPP_

#include <functional>
#include <utility>
#include <vector>

#include "ion/boxes.hpp"
#include "ion/tensor.hpp"

namespace ion {

struct VotingConfig {
  double nms_iou = 0.3;
  double vote_iou = 0.5;  // 0.5 for VOC-style voting, 0.854 tuned for COCO
  bool use_vote = true;
  int rounds = 1;  // 1 or 2 bounding-box regression rounds
  double score_thresh = 0.05;
  int max_per_image = 100;
};

// Greedy NMS by descending score (ties: ascending input index). A detection
// is suppressed by the first kept detection whose IoU with it exceeds
// iou_thresh. The suppression map is recorded for box voting.
struct NmsResult {
  std::vector<int> kept;                    // indices into the input list
  std::vector<std::vector<int>> suppressed; // per kept box, input indices it removed
};

NmsResult nms(const std::vector<Detection>& dets, double iou_thresh);

// MR-CNN style weighted vote: each kept box's coordinates are replaced by the
// score-weighted mean over every pool detection (same class, same image) with
// IoU >= vote_iou against it. Scores are left untouched.
std::vector<Detection> weighted_vote(const std::vector<Detection>& kept, const std::vector<Detection>& pool,
                                     double vote_iou);

// NMS + optional vote per (image, class), then the global per-image score cap.
std::vector<Detection> postprocess_detections(const std::vector<Detection>& pool, const VotingConfig& config);

// Evaluates a batch of boxes: per box, class posteriors (K+1 incl. background
// at index 0) and one BoxDelta per foreground class.
using BoxEvalFn = std::function<void(const std::vector<RoiBox>& boxes, std::vector<std::vector<double>>* scores,
                                     std::vector<std::vector<BoxDelta>>* deltas)>;

// Round 1 scores and regresses the proposals; round 2 re-evaluates the
// regressed boxes. Both rounds' detections are pooled before NMS + voting.
std::vector<Detection> two_round_regression(const std::vector<RoiBox>& proposals, const BoxEvalFn& eval_fn,
                                            const VotingConfig& config, int num_classes, double img_w, double img_h);

// The accumulated (score-prefiltered) detection pool of both rounds, before
// NMS/voting/cap -- the interchange format between the detect and
// postprocess pipeline stages.
std::vector<Detection> two_round_pool(const std::vector<RoiBox>& proposals, const BoxEvalFn& eval_fn,
                                      const VotingConfig& config, int num_classes, double img_w, double img_h);

// Raw per-ROI network outputs for flip merging.
struct RoiOutputs {
  std::vector<std::vector<double>> scores;    // per ROI, K+1 entries
  std::vector<std::vector<BoxDelta>> deltas;  // per ROI, K entries
};

// Averages softmax scores and box regression shifts from evaluating the same
// ROIs on the original and the horizontally mirrored image. Flipped dx values
// are negated when mapped back; dy/dw/dh are unchanged.
RoiOutputs flip_merge(const RoiOutputs& original, const RoiOutputs& flipped, double image_width);

struct ThresholdSearchResult {
  double nms_iou = 0.0;
  double vote_iou = 0.0;
  double map = 0.0;  // COCO-style 0.5:0.95 mAP of the best pair
};

// Random joint search over (nms_iou, vote_iou) in [0,1]^2: detections are
// evaluated once and the cheap threshold stage is re-applied per sample.
ThresholdSearchResult threshold_search(const std::vector<Detection>& pooled_dets,
                                       const std::vector<GroundTruthObject>& gts, int num_classes, int num_samples,
                                       const VotingConfig& base_config, Rng* rng);

struct AnchorConfig {
  double base_w = 32.0, base_h = 32.0;
  std::vector<double> aspect_ratios = {0.5, 1.0, 2.0};  // w:h
  std::vector<double> scales = {64.0, 90.5, 128.0, 181.0, 256.0, 362.0, 512.0};
};

// base shape + ratios x scales grid; for scale s and ratio r the shape is
// (s*sqrt(r), s/sqrt(r)) so the area stays s^2. Default config yields the 22
// anchor shapes of the tuned proposal setup.
std::vector<std::pair<double, double>> generate_anchor_shapes(const AnchorConfig& config);

}  // namespace ion

#endif  // ION_POSTPROCESS_HPP_
