#ifndef ION_MODEL_HPP_
#define ION_MODEL_HPP_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ion/detect_head.hpp"
#include "ion/irnn.hpp"
#include "ion/postprocess.hpp"
#include "ion/serialize.hpp"
#include "ion/skip_pool.hpp"
#include "ion/synth.hpp"

namespace ion {

enum class ContextKind { kNone, kIrnn, kConv3x3, kConv5x5, kGap };

ContextKind context_kind_from_string(const std::string& s);

// Toy backbone channel widths. conv3/conv4/conv5 are the pooling sources at
// image strides 4/8/16.
struct BackboneConfig {
  int c1 = 8, c2 = 16, c3 = 32, c4 = 32, c5 = 48;
};

struct ModelConfig {
  int num_classes = 3;
  int image_size = 64;
  BackboneConfig backbone;
  ContextKind context = ContextKind::kIrnn;
  IrnnBlockConfig irnn;  // hidden units, layers, W_hh mode, dropout, ...
  int context_out_channels = 48;
  std::vector<std::string> pool_sources = {"conv3", "conv4", "conv5", "context"};
  int pooled = 7;
  NormMode norm_mode = NormMode::kSumOverAllEntries;
  ScaleMode scale_mode = ScaleMode::kLearnedPerChannel;
  double scale_init = 0.0;  // <= 0 picks the mode default (1000 / 130)
  int reduced_channels = 64;
  int fc_dim = 96;
  double head_dropout = 0.0;
  bool seg_enabled = true;
  double seg_loss_weight = 1.0;
};

// Labeled ROI produced by the training sampler; label 0 = background.
struct SampledRoi {
  RoiBox box;
  RoiTarget target;
};

struct LossReport {
  double cls = 0.0;
  double bbox = 0.0;
  double seg = 0.0;
  double total = 0.0;
};

// Per-image forward activations kept for ROI evaluation and backward.
struct ImageCache {
  FeatureMap input;
  FeatureMap r1, p1, r2, p2, r3, p3, r4, p4, r5;  // post-ReLU / post-pool maps
  std::vector<int> am1, am2, am3, am4;            // pool argmax records
  FeatureMap ctx;                                 // context features (if any)
  IrnnBlockCache irnn_cache;
  FeatureMap cc1;  // conv-context intermediate (post-ReLU)
};

class IonModel {
 public:
  IonModel(const ModelConfig& config, uint64_t init_seed);

  IonModel(const IonModel&) = delete;
  IonModel& operator=(const IonModel&) = delete;

  const ModelConfig& config() const { return config_; }
  ParamRegistry& params() { return registry_; }
  const ParamRegistry& params() const { return registry_; }
  int descriptor_dim() const;

  ImageCache forward_image(const FeatureMap& image, bool training, Rng* rng) const;

  // Scores and regresses a set of boxes against cached image features.
  RoiOutputs eval_boxes(const ImageCache& cache, const std::vector<RoiBox>& boxes) const;

  // Full training pass for one image; parameter gradients are accumulated
  // into the registry entries.
  LossReport forward_backward(const SyntheticScene& scene, const std::vector<SampledRoi>& rois, Rng* rng);

  // End-to-end detection for one scene (optionally flip-merged).
  std::vector<Detection> detect_scene(const SyntheticScene& scene, const VotingConfig& voting,
                                      bool flip_augment = false) const;

  // Pre-NMS detection pool of both regression rounds for one scene; the
  // interchange the postprocess/threshsearch stages consume.
  std::vector<Detection> pool_scene(const SyntheticScene& scene, const VotingConfig& voting,
                                    bool flip_augment = false) const;

  int source_stride(const std::string& name) const;
  int source_channels(const std::string& name) const;

 private:
  const FeatureMap* source_map(const ImageCache& cache, const std::string& name) const;
  void register_params();
  void accumulate(const std::string& name, const std::vector<double>& grad);

  ModelConfig config_;
  ConvParams conv1_, conv2_, conv3_, conv4_, conv5_;
  IrnnBlockParams irnn_;
  ConvParams ctx_conv1_, ctx_conv2_;
  SkipPoolParams fuse_;
  HeadParams head_;
  SegHeadParams seg_;
  ParamRegistry registry_;
};

}  // namespace ion

#endif  // ION_MODEL_HPP_
