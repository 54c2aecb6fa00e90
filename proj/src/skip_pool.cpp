#include "ion/skip_pool.hpp"

#include <algorithm>
#include <cmath>

#include "ion/ops.hpp"

namespace ion {

namespace {
constexpr double kNormEpsSq = 1e-24;  // (1e-12)^2 guard inside the square root
}

double default_scale_init(NormMode mode) {
  switch (mode) {
    case NormMode::kSumOverAllEntries: return 1000.0;
    case NormMode::kSumAcrossChannels: return 130.0;
    case NormMode::kNone: return 1.0;
  }
  return 1.0;
}

RoiPoolResult roi_max_pool(const FeatureMap& feature, const RoiBox& roi, int stride, int pooled_h, int pooled_w) {
  check(stride >= 1, "roi_max_pool: stride must be >= 1");
  check(pooled_h > 0 && pooled_w > 0, "roi_max_pool: pooled dims must be positive");
  check(roi.ordered(), "roi_max_pool: box coordinates not ordered");

  // Image coords -> feature cells: floor for the top-left edge, ceil for the
  // bottom-right, clamped into the map with a minimum extent of one cell.
  int cx1 = static_cast<int>(std::floor(roi.x1 / stride));
  int cy1 = static_cast<int>(std::floor(roi.y1 / stride));
  int cx2 = static_cast<int>(std::ceil(roi.x2 / stride));
  int cy2 = static_cast<int>(std::ceil(roi.y2 / stride));
  cx1 = std::clamp(cx1, 0, feature.width - 1);
  cy1 = std::clamp(cy1, 0, feature.height - 1);
  cx2 = std::clamp(cx2, cx1 + 1, feature.width);
  cy2 = std::clamp(cy2, cy1 + 1, feature.height);
  int cw = cx2 - cx1;
  int ch = cy2 - cy1;

  RoiPoolResult r;
  r.pooled = FeatureMap(feature.channels, pooled_h, pooled_w);
  r.argmax.assign(r.pooled.size(), -1);
  for (int ph = 0; ph < pooled_h; ++ph) {
    int ys = cy1 + (ph * ch) / pooled_h;
    int ye = cy1 + ((ph + 1) * ch) / pooled_h;
    if (ye <= ys) ye = ys + 1;
    ys = std::min(ys, cy2 - 1);
    ye = std::min(ye, cy2);
    for (int pw = 0; pw < pooled_w; ++pw) {
      int xs = cx1 + (pw * cw) / pooled_w;
      int xe = cx1 + ((pw + 1) * cw) / pooled_w;
      if (xe <= xs) xe = xs + 1;
      xs = std::min(xs, cx2 - 1);
      xe = std::min(xe, cx2);
      for (int c = 0; c < feature.channels; ++c) {
        double best = -1e300;
        int best_idx = -1;
        for (int y = ys; y < ye; ++y) {
          for (int x = xs; x < xe; ++x) {
            double val = feature.at(c, y, x);
            if (val > best) {
              best = val;
              best_idx = y * feature.width + x;
            }
          }
        }
        r.pooled.at(c, ph, pw) = best;
        r.argmax[(static_cast<size_t>(c) * pooled_h + ph) * pooled_w + pw] = best_idx;
      }
    }
  }
  return r;
}

void roi_max_pool_backward(const RoiPoolResult& result, const FeatureMap& grad_pooled, FeatureMap* grad_feature) {
  check(grad_pooled.same_shape(result.pooled), "roi_max_pool_backward: grad shape mismatch");
  const int plane = grad_feature->height * grad_feature->width;
  const int pooled_plane = result.pooled.height * result.pooled.width;
  for (int c = 0; c < result.pooled.channels; ++c) {
    for (int i = 0; i < pooled_plane; ++i) {
      int idx = result.argmax[static_cast<size_t>(c) * pooled_plane + i];
      grad_feature->v[static_cast<size_t>(c) * plane + idx] += grad_pooled.v[static_cast<size_t>(c) * pooled_plane + i];
    }
  }
}

FeatureMap l2_normalize(const FeatureMap& descriptor, NormMode mode) {
  if (mode == NormMode::kNone) return descriptor;
  FeatureMap out = descriptor;
  if (mode == NormMode::kSumOverAllEntries) {
    double ss = 0.0;
    for (double x : descriptor.v) ss += x * x;
    double n = std::sqrt(ss + kNormEpsSq);
    for (double& x : out.v) x /= n;
  } else {
    const int plane = descriptor.height * descriptor.width;
    for (int i = 0; i < plane; ++i) {
      double ss = 0.0;
      for (int c = 0; c < descriptor.channels; ++c) {
        double x = descriptor.v[static_cast<size_t>(c) * plane + i];
        ss += x * x;
      }
      double n = std::sqrt(ss + kNormEpsSq);
      for (int c = 0; c < descriptor.channels; ++c) out.v[static_cast<size_t>(c) * plane + i] /= n;
    }
  }
  return out;
}

FeatureMap l2_normalize_backward(const FeatureMap& descriptor, NormMode mode, const FeatureMap& grad_out) {
  check(descriptor.same_shape(grad_out), "l2_normalize_backward: shape mismatch");
  if (mode == NormMode::kNone) return grad_out;
  FeatureMap grad_in(descriptor.channels, descriptor.height, descriptor.width);
  if (mode == NormMode::kSumOverAllEntries) {
    double ss = 0.0, dot = 0.0;
    for (size_t i = 0; i < descriptor.v.size(); ++i) {
      ss += descriptor.v[i] * descriptor.v[i];
      dot += grad_out.v[i] * descriptor.v[i];
    }
    double n = std::sqrt(ss + kNormEpsSq);
    double n3 = n * n * n;
    for (size_t i = 0; i < descriptor.v.size(); ++i) {
      grad_in.v[i] = grad_out.v[i] / n - descriptor.v[i] * dot / n3;
    }
  } else {
    const int plane = descriptor.height * descriptor.width;
    for (int i = 0; i < plane; ++i) {
      double ss = 0.0, dot = 0.0;
      for (int c = 0; c < descriptor.channels; ++c) {
        double x = descriptor.v[static_cast<size_t>(c) * plane + i];
        ss += x * x;
        dot += grad_out.v[static_cast<size_t>(c) * plane + i] * x;
      }
      double n = std::sqrt(ss + kNormEpsSq);
      double n3 = n * n * n;
      for (int c = 0; c < descriptor.channels; ++c) {
        size_t idx = static_cast<size_t>(c) * plane + i;
        grad_in.v[idx] = grad_out.v[idx] / n - descriptor.v[idx] * dot / n3;
      }
    }
  }
  return grad_in;
}

FeatureMap rescale(const FeatureMap& normalized, const std::vector<double>& scales) {
  FeatureMap out = normalized;
  const int plane = normalized.height * normalized.width;
  if (scales.size() == 1) {
    for (double& x : out.v) x *= scales[0];
    return out;
  }
  check(scales.size() == static_cast<size_t>(normalized.channels), "rescale: need one scale per channel");
  for (int c = 0; c < normalized.channels; ++c) {
    double s = scales[c];
    for (int i = 0; i < plane; ++i) out.v[static_cast<size_t>(c) * plane + i] *= s;
  }
  return out;
}

FeatureMap rescale_backward(const FeatureMap& normalized, const std::vector<double>& scales,
                            const FeatureMap& grad_out, std::vector<double>* grad_scales) {
  check(normalized.same_shape(grad_out), "rescale_backward: shape mismatch");
  FeatureMap grad_in(normalized.channels, normalized.height, normalized.width);
  grad_scales->assign(scales.size(), 0.0);
  const int plane = normalized.height * normalized.width;
  if (scales.size() == 1) {
    double gs = 0.0;
    for (size_t i = 0; i < normalized.v.size(); ++i) {
      gs += grad_out.v[i] * normalized.v[i];
      grad_in.v[i] = grad_out.v[i] * scales[0];
    }
    (*grad_scales)[0] = gs;
    return grad_in;
  }
  check(scales.size() == static_cast<size_t>(normalized.channels), "rescale_backward: need one scale per channel");
  for (int c = 0; c < normalized.channels; ++c) {
    double gs = 0.0;
    for (int i = 0; i < plane; ++i) {
      size_t idx = static_cast<size_t>(c) * plane + i;
      gs += grad_out.v[idx] * normalized.v[idx];
      grad_in.v[idx] = grad_out.v[idx] * scales[c];
    }
    (*grad_scales)[c] = gs;
  }
  return grad_in;
}

SkipPoolParams make_skip_pool(const SkipPoolConfig& config, const std::vector<int>& source_channels, Rng* rng) {
  check(config.sources.size() == source_channels.size(), "make_skip_pool: one channel count per source");
  check(!config.sources.empty(), "make_skip_pool: need at least one source");
  check(config.pooled_h > 0 && config.pooled_w > 0, "make_skip_pool: pooled dims must be positive");
  if (config.norm_mode != NormMode::kNone) {
    check(config.scale_init > 0.0, "make_skip_pool: scale_init must be positive when normalization is enabled");
  }
  SkipPoolParams p;
  p.config = config;
  int concat_ch = 0;
  for (size_t s = 0; s < config.sources.size(); ++s) {
    concat_ch += source_channels[s];
    if (config.norm_mode == NormMode::kNone) {
      p.scales.emplace_back();  // plain concat + 1x1, no scale stage
    } else if (config.scale_mode == ScaleMode::kLearnedPerChannel) {
      p.scales.emplace_back(source_channels[s], config.scale_init);
    } else {
      p.scales.emplace_back(1, config.scale_init);
    }
  }
  p.reduce = ConvParams(config.reduced_channels, concat_ch, 1, 1);
  xavier_fill_conv(&p.reduce, rng);
  return p;
}

FeatureMap fuse_descriptors(const std::vector<const FeatureMap*>& source_maps, const RoiBox& roi,
                            const SkipPoolParams& params, FuseCache* cache) {
  check(source_maps.size() == params.config.sources.size(), "fuse_descriptors: source count mismatch");
  const int ph = params.config.pooled_h, pw = params.config.pooled_w;
  FuseCache local;
  FuseCache& c = cache ? *cache : local;
  c.pools.clear();
  c.normalized.clear();
  c.scaled.clear();

  int concat_ch = 0;
  for (const FeatureMap* m : source_maps) concat_ch += m->channels;
  c.concat = FeatureMap(concat_ch, ph, pw);

  int ch_off = 0;
  for (size_t s = 0; s < source_maps.size(); ++s) {
    RoiPoolResult pr = roi_max_pool(*source_maps[s], roi, params.config.sources[s].spatial_stride, ph, pw);
    FeatureMap normd = l2_normalize(pr.pooled, params.config.norm_mode);
    FeatureMap scaled = params.scales[s].empty() ? normd : rescale(normd, params.scales[s]);
    std::copy(scaled.v.begin(), scaled.v.end(), c.concat.v.begin() + static_cast<size_t>(ch_off) * ph * pw);
    ch_off += source_maps[s]->channels;
    c.pools.push_back(std::move(pr));
    c.normalized.push_back(std::move(normd));
    c.scaled.push_back(std::move(scaled));
  }
  return conv2d_forward(c.concat, params.reduce);
}

void fuse_descriptors_backward(const SkipPoolParams& params, const FuseCache& cache, const FeatureMap& grad_out,
                               std::vector<FeatureMap*> grad_sources, FuseGrads* grads) {
  check(grad_sources.size() == cache.pools.size(), "fuse_descriptors_backward: grad target count mismatch");
  const int ph = params.config.pooled_h, pw = params.config.pooled_w;
  FeatureMap g_concat = conv2d_backward(cache.concat, params.reduce, grad_out, &grads->reduce);
  grads->scales.assign(params.scales.size(), {});

  int ch_off = 0;
  for (size_t s = 0; s < cache.pools.size(); ++s) {
    int ch = cache.pools[s].pooled.channels;
    FeatureMap g_scaled(ch, ph, pw);
    std::copy(g_concat.v.begin() + static_cast<size_t>(ch_off) * ph * pw,
              g_concat.v.begin() + static_cast<size_t>(ch_off + ch) * ph * pw, g_scaled.v.begin());
    ch_off += ch;

    FeatureMap g_norm = params.scales[s].empty()
                            ? g_scaled
                            : rescale_backward(cache.normalized[s], params.scales[s], g_scaled, &grads->scales[s]);
    FeatureMap g_pooled = l2_normalize_backward(cache.pools[s].pooled, params.config.norm_mode, g_norm);
    roi_max_pool_backward(cache.pools[s], g_pooled, grad_sources[s]);
  }
}

double measure_mean_descriptor_norm(const std::vector<const FeatureMap*>& feature_per_image,
                                    const std::vector<RoiBox>& rois, int stride, int pooled_h, int pooled_w,
                                    NormMode mode) {
  check(!rois.empty(), "measure_mean_descriptor_norm: empty ROI sample");
  check(mode != NormMode::kNone, "measure_mean_descriptor_norm: pick a normalization mode");
  double total = 0.0;
  long count = 0;
  for (const RoiBox& roi : rois) {
    check(roi.image_id >= 0 && roi.image_id < static_cast<int>(feature_per_image.size()),
          "measure_mean_descriptor_norm: image_id out of range");
    RoiPoolResult pr = roi_max_pool(*feature_per_image[roi.image_id], roi, stride, pooled_h, pooled_w);
    if (mode == NormMode::kSumOverAllEntries) {
      double ss = 0.0;
      for (double x : pr.pooled.v) ss += x * x;
      total += std::sqrt(ss);
      ++count;
    } else {
      const int plane = pooled_h * pooled_w;
      for (int i = 0; i < plane; ++i) {
        double ss = 0.0;
        for (int c = 0; c < pr.pooled.channels; ++c) {
          double x = pr.pooled.v[static_cast<size_t>(c) * plane + i];
          ss += x * x;
        }
        total += std::sqrt(ss);
        ++count;
      }
    }
  }
  return total / count;
}

}  // namespace ion
