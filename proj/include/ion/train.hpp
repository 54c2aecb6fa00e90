#ifndef ION_TRAIN_HPP_
#define ION_TRAIN_HPP_

#include <string>
#include <vector>

#include "ion/model.hpp"

namespace ion {

// Exponential decay from lr_start at iteration 0 to lr_end at total_iters.
struct LrSchedule {
  double lr_start = 5e-3;
  double lr_end = 1e-4;
  int total_iters = 1;
};

double lr_at(const LrSchedule& schedule, int iter);

// Rescales so the L2 norm equals threshold when it exceeded it; direction is
// preserved, smaller gradients pass through untouched.
std::vector<double> clip_gradient(const std::vector<double>& grad, double threshold);

struct StageConfig {
  std::vector<std::string> freeze;  // layer-name prefixes, e.g. "conv1"
  int iters = 0;
  LrSchedule lr;
};

enum class ClipMode { kAccumulated, kPerImage };

struct TrainConfig {
  int images_per_update = 4;
  int rois_per_image = 128;
  double fg_fraction = 0.25;
  double fg_iou = 0.5;
  double bg_iou_lo = 0.1;
  double bg_iou_hi = 0.5;
  double clip_norm_single = 20.0;
  double clip_norm_accum = 80.0;
  ClipMode clip_mode = ClipMode::kAccumulated;
  double momentum = 0.9;
  std::vector<StageConfig> stages;
  uint64_t seed = 0;
};

// Fixed-fraction foreground/background ROI sampling: fg needs IoU >= fg_iou
// against some ground truth, bg needs max IoU in [bg_iou_lo, bg_iou_hi).
// Shortfalls are filled by repetition; when no bg candidate exists at all the
// lowest-IoU proposals stand in. Deterministic given the RNG state.
std::vector<SampledRoi> sample_rois(const std::vector<RoiBox>& proposals, const std::vector<GroundTruthObject>& gts,
                                    const TrainConfig& config, Rng* rng);

class SgdOptimizer {
 public:
  SgdOptimizer(ParamRegistry* registry, double momentum);

  // Prefixes must each resolve to at least one parameter name.
  void set_frozen(const std::vector<std::string>& prefixes);

  // v <- momentum*v + lr*g ; w <- w - v. Frozen entries are left untouched,
  // including their momentum state.
  void step(double lr);

  void set_momentum(double momentum) { momentum_ = momentum; }

 private:
  ParamRegistry* registry_;
  double momentum_;
  std::vector<std::vector<double>> velocity_;
  std::vector<uint8_t> frozen_;
};

struct StepReport {
  int stage = 0;
  int iter = 0;
  double lr = 0.0;
  double loss_cls = 0.0;
  double loss_bbox = 0.0;
  double loss_seg = 0.0;
  double loss_total = 0.0;
  double grad_norm = 0.0;  // pre-clip accumulated norm
};

// One model update: per-image forward/backward with gradient accumulation,
// global norm clipping, then a momentum SGD step.
StepReport train_step_accumulating(IonModel* model, SgdOptimizer* opt,
                                   const std::vector<const SyntheticScene*>& scenes, const TrainConfig& config,
                                   double lr, Rng* rng);

struct TrainResult {
  std::vector<StepReport> curve;
};

TrainResult run_staged_training(IonModel* model, const std::vector<SyntheticScene>& dataset,
                                const TrainConfig& config);

// Runs the detector over every scene and pools the detections.
std::vector<Detection> detect_dataset(const IonModel& model, const std::vector<SyntheticScene>& scenes,
                                      const VotingConfig& voting, bool flip_augment = false);

std::vector<GroundTruthObject> collect_ground_truth(const std::vector<SyntheticScene>& scenes);

}  // namespace ion

#endif  // ION_TRAIN_HPP_
