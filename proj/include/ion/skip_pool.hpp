#ifndef ION_SKIP_POOL_HPP_
#define ION_SKIP_POOL_HPP_

#include <string>
#include <vector>

#include "ion/boxes.hpp"
#include "ion/conv.hpp"
#include "ion/tensor.hpp"

namespace ion {

enum class NormMode { kSumOverAllEntries, kSumAcrossChannels, kNone };
enum class ScaleMode { kLearnedPerChannel, kFixed };

struct SkipPoolSource {
  std::string layer;
  int spatial_stride = 1;
};

struct SkipPoolConfig {
  std::vector<SkipPoolSource> sources;
  int pooled_h = 7;
  int pooled_w = 7;
  NormMode norm_mode = NormMode::kSumOverAllEntries;
  ScaleMode scale_mode = ScaleMode::kLearnedPerChannel;
  double scale_init = 1000.0;  // 130 when summing across channels
  int reduced_channels = 512;
};

// Measured fixed-scale defaults for the two normalization modes.
double default_scale_init(NormMode mode);

// ROI max pooling: the ROI's image-coordinate rectangle maps to feature cells
// by floor(coord/stride) for the top-left and ceil for the bottom-right
// (minimum one cell), then integer bin edges floor(k*extent/pooled) partition
// the cell rectangle. Argmax (linear index per channel plane) is recorded for
// backward routing; ties break toward the smallest linear index.
struct RoiPoolResult {
  FeatureMap pooled;
  std::vector<int> argmax;  // per pooled entry, spatial index into the source plane
};

RoiPoolResult roi_max_pool(const FeatureMap& feature, const RoiBox& roi, int stride, int pooled_h, int pooled_w);

// Routes each pooled gradient entry to its recorded argmax cell, accumulating
// into grad_feature (which must already have the source shape).
void roi_max_pool_backward(const RoiPoolResult& result, const FeatureMap& grad_pooled, FeatureMap* grad_feature);

// L2 normalization over the whole descriptor or per spatial location. Uses an
// epsilon guard (1e-12) so all-zero inputs stay zero.
FeatureMap l2_normalize(const FeatureMap& descriptor, NormMode mode);
FeatureMap l2_normalize_backward(const FeatureMap& descriptor, NormMode mode, const FeatureMap& grad_out);

// Elementwise rescale. In learned mode `scales` has one entry per channel and
// receives gradients; in fixed mode a single scalar is broadcast.
FeatureMap rescale(const FeatureMap& normalized, const std::vector<double>& scales);
FeatureMap rescale_backward(const FeatureMap& normalized, const std::vector<double>& scales,
                            const FeatureMap& grad_out, std::vector<double>* grad_scales);

// Full fused descriptor: per-source pool -> norm -> scale, channel concat in
// declared source order, then 1x1 reduction to reduced_channels.
struct SkipPoolParams {
  SkipPoolConfig config;
  std::vector<std::vector<double>> scales;  // per source; single entry when fixed
  ConvParams reduce;                        // 1x1, concat channels -> reduced_channels
};

SkipPoolParams make_skip_pool(const SkipPoolConfig& config, const std::vector<int>& source_channels, Rng* rng);

struct FuseCache {
  std::vector<RoiPoolResult> pools;
  std::vector<FeatureMap> normalized;
  std::vector<FeatureMap> scaled;
  FeatureMap concat;
};

FeatureMap fuse_descriptors(const std::vector<const FeatureMap*>& source_maps, const RoiBox& roi,
                            const SkipPoolParams& params, FuseCache* cache);

struct FuseGrads {
  std::vector<std::vector<double>> scales;
  ConvGrads reduce;
};

// Backward through reduce/concat/scale/norm/pool. Per-source feature-map
// gradients are accumulated into grad_sources (caller-owned, source shapes).
void fuse_descriptors_backward(const SkipPoolParams& params, const FuseCache& cache, const FeatureMap& grad_out,
                               std::vector<FeatureMap*> grad_sources, FuseGrads* grads);

// Mean L2 norm of raw pooled descriptors under the given mode; the paper's
// procedure for picking the fixed rescale constant.
double measure_mean_descriptor_norm(const std::vector<const FeatureMap*>& feature_per_image,
                                    const std::vector<RoiBox>& rois, int stride, int pooled_h, int pooled_w,
                                    NormMode mode);

}  // namespace ion

#endif  // ION_SKIP_POOL_HPP_
