#ifndef ION_SYNTH_HPP_
#define ION_SYNTH_HPP_

#include <vector>

#include "ion/boxes.hpp"
#include "ion/tensor.hpp"

namespace ion {

// Desk-scale stand-in for a detection dataset: colored geometric objects
// (1 = rectangle, 2 = disc, 3 = triangle) on noisy backgrounds, with ground
// truth boxes, a per-pixel class map, and jittered proposal boxes whose
// recall is deliberately worse for small objects.
struct SyntheticScene {
  int image_id = 0;
  FeatureMap image;  // 3 x S x S, values roughly in [0, 1]
  std::vector<GroundTruthObject> objects;
  std::vector<int> pixel_classes;  // S*S row-major, 0 = background
  std::vector<RoiBox> proposals;
};

struct SynthConfig {
  int image_size = 64;
  int num_classes = 3;
  int min_objects = 1;
  int max_objects = 3;
  double min_side = 10.0;
  double max_side = 30.0;
  // Objects with side below this get the poor-proposal treatment.
  double small_side = 14.0;
  double small_keep_prob = 0.45;
  double large_keep_prob = 0.95;
  int jitters_per_object = 6;
  double jitter_frac = 0.12;
  int random_proposals = 20;
};

std::vector<SyntheticScene> generate_shapes_dataset(uint64_t seed, int n_images, const SynthConfig& config);

// Horizontal mirror helpers for flip-augmented evaluation.
FeatureMap flip_image_lr(const FeatureMap& image);
RoiBox flip_roi_lr(const RoiBox& roi, double image_width);

// Fraction of non-difficult ground truths covered by some proposal at
// iou >= thresh; used to characterize generated proposal quality.
double proposal_recall(const std::vector<SyntheticScene>& scenes, double iou_thresh, double min_side,
                       double max_side);

}  // namespace ion

#endif  // ION_SYNTH_HPP_
