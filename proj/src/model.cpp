#include "ion/model.hpp"

#include <algorithm>
#include <cmath>

namespace ion {

ContextKind context_kind_from_string(const std::string& s) {
  if (s == "none") return ContextKind::kNone;
  if (s == "irnn") return ContextKind::kIrnn;
  if (s == "conv3x3") return ContextKind::kConv3x3;
  if (s == "conv5x5") return ContextKind::kConv5x5;
  if (s == "gap") return ContextKind::kGap;
  throw std::invalid_argument("unknown context kind '" + s + "'");
}

IonModel::IonModel(const ModelConfig& config, uint64_t init_seed) : config_(config) {
  check(config.image_size % 16 == 0, "IonModel: image_size must be divisible by 16");
  check(config.num_classes >= 1, "IonModel: need at least one class");
  Rng rng(init_seed);

  const BackboneConfig& bb = config.backbone;
  conv1_ = ConvParams(bb.c1, 3, 3, 3, 1, 1);
  conv2_ = ConvParams(bb.c2, bb.c1, 3, 3, 1, 1);
  conv3_ = ConvParams(bb.c3, bb.c2, 3, 3, 1, 1);
  conv4_ = ConvParams(bb.c4, bb.c3, 3, 3, 1, 1);
  conv5_ = ConvParams(bb.c5, bb.c4, 3, 3, 1, 1);
  for (ConvParams* c : {&conv1_, &conv2_, &conv3_, &conv4_, &conv5_}) xavier_fill_conv(c, &rng);

  const int ctx_out = config.context_out_channels;
  switch (config.context) {
    case ContextKind::kIrnn: {
      IrnnBlockConfig ic = config.irnn;
      ic.out_channels = ctx_out;
      irnn_ = make_irnn_block(bb.c5, ic, &rng);
      break;
    }
    case ContextKind::kConv3x3:
      ctx_conv1_ = ConvParams(ctx_out, bb.c5, 3, 3, 1, 1);
      ctx_conv2_ = ConvParams(ctx_out, ctx_out, 3, 3, 1, 1);
      xavier_fill_conv(&ctx_conv1_, &rng);
      xavier_fill_conv(&ctx_conv2_, &rng);
      break;
    case ContextKind::kConv5x5:
      ctx_conv1_ = ConvParams(ctx_out, bb.c5, 5, 5, 1, 2);
      ctx_conv2_ = ConvParams(ctx_out, ctx_out, 5, 5, 1, 2);
      xavier_fill_conv(&ctx_conv1_, &rng);
      xavier_fill_conv(&ctx_conv2_, &rng);
      break;
    case ContextKind::kGap:
    case ContextKind::kNone:
      break;
  }

  SkipPoolConfig pool_cfg;
  for (const std::string& name : config.pool_sources) {
    pool_cfg.sources.push_back({name, source_stride(name)});
  }
  pool_cfg.pooled_h = pool_cfg.pooled_w = config.pooled;
  pool_cfg.norm_mode = config.norm_mode;
  pool_cfg.scale_mode = config.scale_mode;
  pool_cfg.scale_init = config.scale_init > 0.0 ? config.scale_init : default_scale_init(config.norm_mode);
  pool_cfg.reduced_channels = config.reduced_channels;
  std::vector<int> source_ch;
  for (const std::string& name : config.pool_sources) source_ch.push_back(source_channels(name));
  fuse_ = make_skip_pool(pool_cfg, source_ch, &rng);

  head_ = make_head(descriptor_dim(), config.fc_dim, config.num_classes, config.head_dropout, &rng);

  if (config.seg_enabled) {
    check(config.context != ContextKind::kNone, "IonModel: segmentation head requires context features");
    seg_ = make_seg_head(ctx_out, config.num_classes + 1, 16, &rng);
    seg_.loss_weight = config.seg_loss_weight;
  }

  register_params();
}

int IonModel::descriptor_dim() const { return config_.reduced_channels * config_.pooled * config_.pooled; }

int IonModel::source_stride(const std::string& name) const {
  if (name == "conv3") return 4;
  if (name == "conv4") return 8;
  if (name == "conv5" || name == "context" || name == "context1") return 16;
  throw std::invalid_argument("unknown pooling source '" + name + "'");
}

int IonModel::source_channels(const std::string& name) const {
  if (name == "conv3") return config_.backbone.c3;
  if (name == "conv4") return config_.backbone.c4;
  if (name == "conv5") return config_.backbone.c5;
  if (name == "context" || name == "context1") {
    check(config_.context != ContextKind::kNone, "pooling source '" + name + "' requires a context operator");
    if (name == "context1") {
      check(config_.context == ContextKind::kIrnn && config_.irnn.num_layers >= 2,
            "pooling source 'context1' requires a stacked recurrent context");
    }
    return config_.context == ContextKind::kGap ? config_.backbone.c5 : config_.context_out_channels;
  }
  throw std::invalid_argument("unknown pooling source '" + name + "'");
}

void IonModel::register_params() {
  auto add_conv = [&](const std::string& name, ConvParams& c) {
    registry_.add(name + ".w", {c.out_channels, c.in_channels, c.kernel_h, c.kernel_w}, &c.weights);
    registry_.add(name + ".b", {c.out_channels}, &c.bias);
  };
  auto add_dense = [&](const std::string& name, Dense& d) {
    registry_.add(name + ".w", {d.out, d.in}, &d.w);
    registry_.add(name + ".b", {d.out}, &d.b);
  };

  add_conv("conv1", conv1_);
  add_conv("conv2", conv2_);
  add_conv("conv3", conv3_);
  add_conv("conv4", conv4_);
  add_conv("conv5", conv5_);

  if (config_.context == ContextKind::kIrnn) {
    for (size_t l = 0; l < irnn_.layers.size(); ++l) {
      IrnnLayerParams& layer = irnn_.layers[l];
      std::string base = "ctx.l" + std::to_string(l + 1);
      add_conv(base + ".in", layer.input_to_hidden);
      for (size_t d = 0; d < layer.directions.size(); ++d) {
        IrnnDirectionParams& dp = layer.per_dir[d];
        std::string dname = direction_name(layer.directions[d]);
        if (dp.learn_whh) {
          registry_.add(base + ".whh." + dname, {dp.hidden_units, dp.hidden_units}, &dp.whh);
        }
        if (dp.use_first_step_bias) {
          registry_.add(base + ".b0." + dname, {dp.hidden_units}, &dp.first_step_bias);
        }
      }
      add_conv(base + ".reduce", layer.reduce);
    }
  } else if (config_.context == ContextKind::kConv3x3 || config_.context == ContextKind::kConv5x5) {
    add_conv("ctx.conv1", ctx_conv1_);
    add_conv("ctx.conv2", ctx_conv2_);
  }

  if (config_.norm_mode != NormMode::kNone && config_.scale_mode == ScaleMode::kLearnedPerChannel) {
    for (size_t s = 0; s < fuse_.scales.size(); ++s) {
      registry_.add("fuse.scale." + config_.pool_sources[s], {static_cast<int>(fuse_.scales[s].size())},
                    &fuse_.scales[s]);
    }
  }
  add_conv("fuse.reduce", fuse_.reduce);

  add_dense("fc6", head_.fc6);
  add_dense("fc7", head_.fc7);
  add_dense("cls", head_.cls_out);
  add_dense("bbox", head_.bbox_out);

  if (config_.seg_enabled) {
    add_conv("seg.score", seg_.score);
    add_conv("seg.deconv", seg_.deconv);
  }
}

void IonModel::accumulate(const std::string& name, const std::vector<double>& grad) {
  ParamEntry* e = registry_.find(name);
  check(e != nullptr, "IonModel::accumulate: unknown parameter " + name);
  check(e->grad.size() == grad.size(), "IonModel::accumulate: size mismatch for " + name);
  for (size_t i = 0; i < grad.size(); ++i) e->grad[i] += grad[i];
}

ImageCache IonModel::forward_image(const FeatureMap& image, bool training, Rng* rng) const {
  check(image.channels == 3 && image.height == config_.image_size && image.width == config_.image_size,
        "forward_image: expected 3x" + std::to_string(config_.image_size) + "x" + std::to_string(config_.image_size) +
            " image, got " + image.shape_str());
  ImageCache c;
  c.input = image;
  c.r1 = relu_forward(conv2d_forward(image, conv1_));
  c.p1 = maxpool2x2_forward(c.r1, &c.am1);
  c.r2 = relu_forward(conv2d_forward(c.p1, conv2_));
  c.p2 = maxpool2x2_forward(c.r2, &c.am2);
  c.r3 = relu_forward(conv2d_forward(c.p2, conv3_));  // stride 4 source
  c.p3 = maxpool2x2_forward(c.r3, &c.am3);
  c.r4 = relu_forward(conv2d_forward(c.p3, conv4_));  // stride 8 source
  c.p4 = maxpool2x2_forward(c.r4, &c.am4);
  c.r5 = relu_forward(conv2d_forward(c.p4, conv5_));  // stride 16 source

  switch (config_.context) {
    case ContextKind::kIrnn:
      c.ctx = irnn_block_forward(c.r5, irnn_, training, rng, &c.irnn_cache);
      break;
    case ContextKind::kConv3x3:
    case ContextKind::kConv5x5:
      c.cc1 = relu_forward(conv2d_forward(c.r5, ctx_conv1_));
      c.ctx = relu_forward(conv2d_forward(c.cc1, ctx_conv2_));
      break;
    case ContextKind::kGap:
      c.ctx = global_average_pool_unpool(c.r5);
      break;
    case ContextKind::kNone:
      break;
  }
  return c;
}

const FeatureMap* IonModel::source_map(const ImageCache& cache, const std::string& name) const {
  if (name == "conv3") return &cache.r3;
  if (name == "conv4") return &cache.r4;
  if (name == "conv5") return &cache.r5;
  if (name == "context") return &cache.ctx;
  if (name == "context1") return &cache.irnn_cache.layers[1].input;  // layer-1 post-dropout output
  throw std::invalid_argument("unknown pooling source '" + name + "'");
}

RoiOutputs IonModel::eval_boxes(const ImageCache& cache, const std::vector<RoiBox>& boxes) const {
  RoiOutputs out;
  const int n = static_cast<int>(boxes.size());
  if (n == 0) return out;
  std::vector<const FeatureMap*> sources;
  for (const std::string& name : config_.pool_sources) sources.push_back(source_map(cache, name));

  const int dim = descriptor_dim();
  std::vector<double> x(static_cast<size_t>(dim) * n);
  for (int j = 0; j < n; ++j) {
    FeatureMap desc = fuse_descriptors(sources, boxes[j], fuse_, nullptr);
    for (int i = 0; i < dim; ++i) x[static_cast<size_t>(i) * n + j] = desc.v[i];
  }
  HeadCache hc;
  head_forward(head_, x, n, /*training=*/false, nullptr, &hc);

  const int k1 = config_.num_classes + 1;
  out.scores.resize(n);
  out.deltas.resize(n);
  for (int j = 0; j < n; ++j) {
    out.scores[j].resize(k1);
    for (int c2 = 0; c2 < k1; ++c2) out.scores[j][c2] = hc.probs[static_cast<size_t>(c2) * n + j];
    out.deltas[j].resize(config_.num_classes);
    for (int c2 = 0; c2 < config_.num_classes; ++c2) {
      BoxDelta d;
      d.dx = hc.deltas[static_cast<size_t>(4 * c2 + 0) * n + j];
      d.dy = hc.deltas[static_cast<size_t>(4 * c2 + 1) * n + j];
      d.dw = hc.deltas[static_cast<size_t>(4 * c2 + 2) * n + j];
      d.dh = hc.deltas[static_cast<size_t>(4 * c2 + 3) * n + j];
      out.deltas[j][c2] = d;
    }
  }
  return out;
}

LossReport IonModel::forward_backward(const SyntheticScene& scene, const std::vector<SampledRoi>& rois, Rng* rng) {
  check(!rois.empty(), "forward_backward: empty ROI batch");
  ImageCache ic = forward_image(scene.image, /*training=*/true, rng);

  // Descriptors for the sampled ROIs.
  const int n = static_cast<int>(rois.size());
  const int dim = descriptor_dim();
  std::vector<const FeatureMap*> sources;
  for (const std::string& name : config_.pool_sources) sources.push_back(source_map(ic, name));

  std::vector<FuseCache> fuse_caches(n);
  std::vector<double> x(static_cast<size_t>(dim) * n);
  for (int j = 0; j < n; ++j) {
    FeatureMap desc = fuse_descriptors(sources, rois[j].box, fuse_, &fuse_caches[j]);
    for (int i = 0; i < dim; ++i) x[static_cast<size_t>(i) * n + j] = desc.v[i];
  }

  HeadCache hc;
  head_forward(head_, x, n, /*training=*/true, rng, &hc);

  std::vector<RoiTarget> targets(n);
  for (int j = 0; j < n; ++j) targets[j] = rois[j].target;
  MultitaskLoss ml = multitask_loss(hc.probs, hc.deltas, n, config_.num_classes, targets);

  HeadGrads hg;
  std::vector<double> gx = head_backward(head_, hc, ml.grad_logits, ml.grad_deltas, &hg);
  accumulate("fc6.w", hg.fc6.w);
  accumulate("fc6.b", hg.fc6.b);
  accumulate("fc7.w", hg.fc7.w);
  accumulate("fc7.b", hg.fc7.b);
  accumulate("cls.w", hg.cls_out.w);
  accumulate("cls.b", hg.cls_out.b);
  accumulate("bbox.w", hg.bbox_out.w);
  accumulate("bbox.b", hg.bbox_out.b);

  // Per-source feature-map gradient accumulators.
  std::map<std::string, FeatureMap> source_grads;
  for (const std::string& name : config_.pool_sources) {
    const FeatureMap* m = source_map(ic, name);
    source_grads.emplace(name, FeatureMap(m->channels, m->height, m->width));
  }
  // Route ROI descriptor gradients back through fuse -> pool.
  for (int j = 0; j < n; ++j) {
    FeatureMap gd(config_.reduced_channels, config_.pooled, config_.pooled);
    for (int i = 0; i < dim; ++i) gd.v[i] = gx[static_cast<size_t>(i) * n + j];
    std::vector<FeatureMap*> targets_j;
    for (const std::string& name : config_.pool_sources) targets_j.push_back(&source_grads.at(name));
    FuseGrads fg;
    fuse_descriptors_backward(fuse_, fuse_caches[j], gd, targets_j, &fg);
    accumulate("fuse.reduce.w", fg.reduce.weights);
    accumulate("fuse.reduce.b", fg.reduce.bias);
    if (config_.norm_mode != NormMode::kNone && config_.scale_mode == ScaleMode::kLearnedPerChannel) {
      for (size_t s = 0; s < fg.scales.size(); ++s) {
        accumulate("fuse.scale." + config_.pool_sources[s], fg.scales[s]);
      }
    }
  }

  LossReport report;
  report.cls = ml.cls_loss;
  report.bbox = ml.bbox_loss;

  // Context gradient: skip-pool route plus the segmentation regularizer.
  FeatureMap g_ctx;
  bool has_ctx = config_.context != ContextKind::kNone;
  if (has_ctx) {
    auto it = source_grads.find("context");
    g_ctx = (it != source_grads.end()) ? it->second : FeatureMap(ic.ctx.channels, ic.ctx.height, ic.ctx.width);
  }
  if (config_.seg_enabled) {
    SegHeadResult sr = seg_head_forward(ic.ctx, seg_, &scene.pixel_classes);
    report.seg = sr.loss;
    SegHeadGrads sg;
    FeatureMap g_seg = seg_head_backward(ic.ctx, seg_, sr, scene.pixel_classes, &sg);
    accumulate("seg.score.w", sg.score.weights);
    accumulate("seg.score.b", sg.score.bias);
    accumulate("seg.deconv.w", sg.deconv.weights);
    accumulate("seg.deconv.b", sg.deconv.bias);
    for (size_t i = 0; i < g_ctx.v.size(); ++i) g_ctx.v[i] += g_seg.v[i];
  }

  // Gradient flowing into conv5 output: direct skip-pool route + context.
  FeatureMap g_r5(ic.r5.channels, ic.r5.height, ic.r5.width);
  if (auto it = source_grads.find("conv5"); it != source_grads.end()) g_r5 = it->second;
  if (has_ctx) {
    switch (config_.context) {
      case ContextKind::kIrnn: {
        IrnnBlockGrads bg;
        std::vector<const FeatureMap*> extra(irnn_.layers.size(), nullptr);
        auto it = source_grads.find("context1");
        if (it != source_grads.end()) extra[0] = &it->second;
        FeatureMap g = irnn_block_backward(irnn_, ic.irnn_cache, g_ctx, &bg, &extra);
        for (size_t l = 0; l < irnn_.layers.size(); ++l) {
          std::string base = "ctx.l" + std::to_string(l + 1);
          accumulate(base + ".in.w", bg.layers[l].input_to_hidden.weights);
          accumulate(base + ".in.b", bg.layers[l].input_to_hidden.bias);
          for (size_t d = 0; d < irnn_.layers[l].directions.size(); ++d) {
            std::string dname = direction_name(irnn_.layers[l].directions[d]);
            if (irnn_.layers[l].per_dir[d].learn_whh) {
              accumulate(base + ".whh." + dname, bg.layers[l].per_dir[d].whh);
            }
            if (irnn_.layers[l].per_dir[d].use_first_step_bias) {
              accumulate(base + ".b0." + dname, bg.layers[l].per_dir[d].first_step_bias);
            }
          }
          accumulate(base + ".reduce.w", bg.layers[l].reduce.weights);
          accumulate(base + ".reduce.b", bg.layers[l].reduce.bias);
        }
        for (size_t i = 0; i < g_r5.v.size(); ++i) g_r5.v[i] += g.v[i];
        break;
      }
      case ContextKind::kConv3x3:
      case ContextKind::kConv5x5: {
        FeatureMap g2 = relu_backward(ic.ctx, g_ctx);
        ConvGrads cg2;
        FeatureMap g1 = conv2d_backward(ic.cc1, ctx_conv2_, g2, &cg2);
        accumulate("ctx.conv2.w", cg2.weights);
        accumulate("ctx.conv2.b", cg2.bias);
        FeatureMap g1m = relu_backward(ic.cc1, g1);
        ConvGrads cg1;
        FeatureMap g0 = conv2d_backward(ic.r5, ctx_conv1_, g1m, &cg1);
        accumulate("ctx.conv1.w", cg1.weights);
        accumulate("ctx.conv1.b", cg1.bias);
        for (size_t i = 0; i < g_r5.v.size(); ++i) g_r5.v[i] += g0.v[i];
        break;
      }
      case ContextKind::kGap: {
        FeatureMap g = global_average_pool_unpool_backward(ic.r5, g_ctx);
        for (size_t i = 0; i < g_r5.v.size(); ++i) g_r5.v[i] += g.v[i];
        break;
      }
      case ContextKind::kNone:
        break;
    }
  }

  // Backbone backward. Post-ReLU maps double as the ReLU mask (r > 0 iff the
  // pre-activation was > 0).
  ConvGrads cg;
  FeatureMap g = relu_backward(ic.r5, g_r5);
  g = conv2d_backward(ic.p4, conv5_, g, &cg);
  accumulate("conv5.w", cg.weights);
  accumulate("conv5.b", cg.bias);
  g = maxpool2x2_backward(ic.r4, g, ic.am4);
  if (auto it = source_grads.find("conv4"); it != source_grads.end()) {
    for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += it->second.v[i];
  }
  g = relu_backward(ic.r4, g);
  g = conv2d_backward(ic.p3, conv4_, g, &cg);
  accumulate("conv4.w", cg.weights);
  accumulate("conv4.b", cg.bias);
  g = maxpool2x2_backward(ic.r3, g, ic.am3);
  if (auto it = source_grads.find("conv3"); it != source_grads.end()) {
    for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += it->second.v[i];
  }
  g = relu_backward(ic.r3, g);
  g = conv2d_backward(ic.p2, conv3_, g, &cg);
  accumulate("conv3.w", cg.weights);
  accumulate("conv3.b", cg.bias);
  g = maxpool2x2_backward(ic.r2, g, ic.am2);
  g = relu_backward(ic.r2, g);
  g = conv2d_backward(ic.p1, conv2_, g, &cg);
  accumulate("conv2.w", cg.weights);
  accumulate("conv2.b", cg.bias);
  g = maxpool2x2_backward(ic.r1, g, ic.am1);
  g = relu_backward(ic.r1, g);
  conv2d_backward(ic.input, conv1_, g, &cg);
  accumulate("conv1.w", cg.weights);
  accumulate("conv1.b", cg.bias);

  report.total = ml.total + report.seg;
  return report;
}

namespace {

BoxEvalFn make_eval_fn(const IonModel& model, const ImageCache& cache, const ImageCache* flip_cache, double img) {
  return [&model, &cache, flip_cache, img](const std::vector<RoiBox>& boxes, std::vector<std::vector<double>>* scores,
                                           std::vector<std::vector<BoxDelta>>* deltas) {
    RoiOutputs o = model.eval_boxes(cache, boxes);
    if (flip_cache) {
      std::vector<RoiBox> mirrored;
      mirrored.reserve(boxes.size());
      for (const RoiBox& b : boxes) mirrored.push_back(flip_roi_lr(b, img));
      RoiOutputs of = model.eval_boxes(*flip_cache, mirrored);
      o = flip_merge(o, of, img);
    }
    *scores = std::move(o.scores);
    *deltas = std::move(o.deltas);
  };
}

}  // namespace

std::vector<Detection> IonModel::detect_scene(const SyntheticScene& scene, const VotingConfig& voting,
                                              bool flip_augment) const {
  ImageCache cache = forward_image(scene.image, /*training=*/false, nullptr);
  ImageCache flip_cache;
  if (flip_augment) flip_cache = forward_image(flip_image_lr(scene.image), /*training=*/false, nullptr);
  const double img = config_.image_size;
  BoxEvalFn eval = make_eval_fn(*this, cache, flip_augment ? &flip_cache : nullptr, img);
  return two_round_regression(scene.proposals, eval, voting, config_.num_classes, img, img);
}

std::vector<Detection> IonModel::pool_scene(const SyntheticScene& scene, const VotingConfig& voting,
                                            bool flip_augment) const {
  ImageCache cache = forward_image(scene.image, /*training=*/false, nullptr);
  ImageCache flip_cache;
  if (flip_augment) flip_cache = forward_image(flip_image_lr(scene.image), /*training=*/false, nullptr);
  const double img = config_.image_size;
  BoxEvalFn eval = make_eval_fn(*this, cache, flip_augment ? &flip_cache : nullptr, img);
  return two_round_pool(scene.proposals, eval, voting, config_.num_classes, img, img);
}

}  // namespace ion
