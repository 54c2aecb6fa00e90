#ifndef ION_IRNN_HPP_
#define ION_IRNN_HPP_

#include <optional>
#include <vector>

#include "ion/conv.hpp"
#include "ion/ops.hpp"
#include "ion/tensor.hpp"

namespace ion {

enum class Direction { kRight = 0, kLeft = 1, kDown = 2, kUp = 3 };

const char* direction_name(Direction d);

// One spatial ReLU recurrence. With learn_whh the hidden transition matrix is
// a learned hidden x hidden matrix initialized to the identity; without it the
// update degenerates to a ReLU accumulator (no matrix at all).
struct IrnnDirectionParams {
  int hidden_units = 0;
  bool learn_whh = true;
  std::vector<double> whh;  // hidden x hidden, row-major; empty when !learn_whh
  bool use_first_step_bias = false;
  std::vector<double> first_step_bias;  // b0, length hidden_units; zero-init

  static IrnnDirectionParams identity_init(int hidden_units, bool learn_whh, bool use_b0);
};

struct IrnnDirectionGrads {
  std::vector<double> whh;
  std::vector<double> first_step_bias;
};

// Sweeps the seeded hidden map along one direction, stepping every row (or
// column) together per step. seeded_hidden already contains the shared 1x1
// input-to-hidden result copied in place as the per-step input.
FeatureMap irnn_direction_forward(const FeatureMap& seeded_hidden, Direction dir, const IrnnDirectionParams& params);

// Fixed-identity accumulator path (no matrix multiply).
FeatureMap irnn_accumulator_forward(const FeatureMap& seeded_hidden, Direction dir,
                                    const IrnnDirectionParams& params);

// One-cell-at-a-time reference sweep; kept as a test oracle for the batched
// stepping contract, not used on the production path.
FeatureMap irnn_direction_forward_reference(const FeatureMap& seeded_hidden, Direction dir,
                                            const IrnnDirectionParams& params);

// Reverse-order recurrence. `output` is the forward result (it caches both
// the ReLU mask and the lagged hidden states).
FeatureMap irnn_direction_backward(const FeatureMap& output, const FeatureMap& grad_out, Direction dir,
                                   const IrnnDirectionParams& params, IrnnDirectionGrads* grads);

// One stacked layer: shared 1x1 input-to-hidden, directional sweeps, channel
// concat in declared direction order, 1x1 reduction.
struct IrnnLayerParams {
  ConvParams input_to_hidden;                // 1x1, shared across directions
  std::vector<Direction> directions;         // concat order; default right,left,down,up
  std::vector<IrnnDirectionParams> per_dir;  // one per entry in `directions`
  ConvParams reduce;                         // 1x1, directions.size()*hidden -> out
};

struct IrnnBlockParams {
  std::vector<IrnnLayerParams> layers;  // 1..3 stacked layers, default 2
  double dropout_p = 0.25;
};

struct IrnnBlockConfig {
  int hidden_units = 512;
  int num_layers = 2;
  int out_channels = 0;  // 0 -> same as input channels
  bool learn_whh = true;
  bool use_first_step_bias = false;
  double dropout_p = 0.25;
  bool two_direction = false;  // layer 1 right+left, layer 2 down+up
};

IrnnBlockParams make_irnn_block(int in_channels, const IrnnBlockConfig& config, Rng* rng);

// Everything the backward pass needs from the forward sweep.
struct IrnnLayerCache {
  FeatureMap input;
  FeatureMap seeded;
  std::vector<FeatureMap> dir_outputs;
  FeatureMap concat;
  FeatureMap reduced;
  std::vector<uint8_t> dropout_mask;
};

struct IrnnBlockCache {
  std::vector<IrnnLayerCache> layers;
  bool training = false;
};

FeatureMap irnn_block_forward(const FeatureMap& features, const IrnnBlockParams& params, bool training, Rng* rng,
                              IrnnBlockCache* cache);

struct IrnnLayerGrads {
  ConvGrads input_to_hidden;
  std::vector<IrnnDirectionGrads> per_dir;
  ConvGrads reduce;
};

struct IrnnBlockGrads {
  std::vector<IrnnLayerGrads> layers;
};

// extra_output_grads, when given, holds one optional gradient per layer that
// is added to the gradient flowing into that layer's (post-dropout) output --
// used when intermediate layer outputs feed skip pooling.
FeatureMap irnn_block_backward(const IrnnBlockParams& params, const IrnnBlockCache& cache,
                               const FeatureMap& grad_out, IrnnBlockGrads* grads,
                               const std::vector<const FeatureMap*>* extra_output_grads = nullptr);

// Table-style variant: layer 1 runs only left/right, layer 2 only up/down.
IrnnBlockParams make_two_direction_block(int in_channels, const IrnnBlockConfig& config, Rng* rng);

// Semantic-segmentation regularizer head: 1x1 class projection followed by a
// bilinear-initialized upsampling deconv (stride 16, 32x32 kernel) and a
// softmax loss averaged over non-ignored pixels.
struct SegHeadParams {
  ConvParams score;   // 1x1, context_channels -> num_classes
  ConvParams deconv;  // num_classes -> num_classes, stride 16, 32x32 kernel
  int num_classes = 0;
  double loss_weight = 1.0;
};

SegHeadParams make_seg_head(int context_channels, int num_classes, int upsample_factor, Rng* rng);

struct SegHeadGrads {
  ConvGrads score;
  ConvGrads deconv;
};

struct SegHeadResult {
  FeatureMap class_scores;  // low-res class logits (cached for backward)
  FeatureMap scores;        // per-pixel class logits at upsampled resolution
  double loss = 0.0;
  int labeled_pixels = 0;
};

constexpr int kSegIgnoreLabel = -1;

// labels: per-pixel class map (height x width of the upsampled output, row
// major), entries in [0, num_classes) or kSegIgnoreLabel.
SegHeadResult seg_head_forward(const FeatureMap& context, const SegHeadParams& params,
                               const std::vector<int>* labels);

// Returns grad w.r.t. context features; fills score/deconv parameter grads.
FeatureMap seg_head_backward(const FeatureMap& context, const SegHeadParams& params, const SegHeadResult& result,
                             const std::vector<int>& labels, SegHeadGrads* grads);

}  // namespace ion

#endif  // ION_IRNN_HPP_
