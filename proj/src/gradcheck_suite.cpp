#include "ion/gradcheck_suite.hpp"

#include <cmath>
#include <functional>

#include "ion/conv.hpp"
#include "ion/detect_head.hpp"
#include "ion/irnn.hpp"
#include "ion/ops.hpp"
#include "ion/skip_pool.hpp"

namespace ion {

namespace {

constexpr double kEps = 1e-5;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> rand_vec(size_t n, double lo, double hi, Rng* rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng->uniform(lo, hi);
  return v;
}

// Values away from zero on both sides, for ops with a ReLU kink.
std::vector<double> rand_vec_away_from_zero(size_t n, Rng* rng) {
  std::vector<double> v(n);
  for (double& x : v) {
    double mag = rng->uniform(0.05, 1.0);
    x = rng->uniform01() < 0.5 ? -mag : mag;
  }
  return v;
}

FeatureMap to_map(const std::vector<double>& v, int c, int h, int w, size_t offset = 0) {
  FeatureMap m(c, h, w);
  std::copy(v.begin() + offset, v.begin() + offset + m.size(), m.v.begin());
  return m;
}

using ScalarFn = std::function<double(const std::vector<double>&)>;

// One gradcheck instance: |analytic - central difference| relative error.
double run_instance(const ScalarFn& fn, const std::vector<double>& point, std::vector<double> analytic, bool corrupt,
                    Rng* rng) {
  if (corrupt && !analytic.empty()) analytic[0] += 0.5;
  FiniteDiff fd = finite_diff_grad(fn, point, kEps, rng);
  return max_rel_error(analytic, fd);
}

double check_conv2d(Rng* rng, bool corrupt) {
  int in_c = 1 + rng->uniform_int(3), out_c = 1 + rng->uniform_int(3);
  int k = rng->uniform01() < 0.4 ? 1 : 3;
  int pad = (k == 3 && rng->uniform01() < 0.5) ? 1 : 0;
  int h = 4 + rng->uniform_int(3), w = 4 + rng->uniform_int(3);
  ConvParams params(out_c, in_c, k, k, 1, pad);

  size_t n_in = static_cast<size_t>(in_c) * h * w;
  std::vector<double> point = rand_vec(n_in + params.weights.size() + params.bias.size(), -1.0, 1.0, rng);
  int oh = conv_out_dim(h, k, 1, pad), ow = conv_out_dim(w, k, 1, pad);
  std::vector<double> proj = rand_vec(static_cast<size_t>(out_c) * oh * ow, -1.0, 1.0, rng);

  auto split = [&](const std::vector<double>& x, FeatureMap* in, ConvParams* p) {
    *in = to_map(x, in_c, h, w);
    *p = params;
    std::copy(x.begin() + n_in, x.begin() + n_in + params.weights.size(), p->weights.begin());
    std::copy(x.begin() + n_in + params.weights.size(), x.end(), p->bias.begin());
  };
  ScalarFn fn = [&](const std::vector<double>& x) {
    FeatureMap in;
    ConvParams p;
    split(x, &in, &p);
    return dot(conv2d_forward(in, p).v, proj);
  };
  FeatureMap in;
  ConvParams p;
  split(point, &in, &p);
  ConvGrads cg;
  FeatureMap gin = conv2d_backward(in, p, to_map(proj, out_c, oh, ow), &cg);
  std::vector<double> analytic = gin.v;
  analytic.insert(analytic.end(), cg.weights.begin(), cg.weights.end());
  analytic.insert(analytic.end(), cg.bias.begin(), cg.bias.end());
  return run_instance(fn, point, analytic, corrupt, rng);
}

double check_deconv(Rng* rng, bool corrupt) {
  int c_in = 1 + rng->uniform_int(2), c_out = 1 + rng->uniform_int(2);
  int h = 3, w = 3, stride = 2, k = 4;
  int target = h * stride;
  ConvParams params(c_out, c_in, k, k, stride, 0);
  size_t n_in = static_cast<size_t>(c_in) * h * w;
  std::vector<double> point = rand_vec(n_in + params.weights.size() + params.bias.size(), -1.0, 1.0, rng);
  std::vector<double> proj = rand_vec(static_cast<size_t>(c_out) * target * target, -1.0, 1.0, rng);

  auto split = [&](const std::vector<double>& x, FeatureMap* in, ConvParams* p) {
    *in = to_map(x, c_in, h, w);
    *p = params;
    std::copy(x.begin() + n_in, x.begin() + n_in + params.weights.size(), p->weights.begin());
    std::copy(x.begin() + n_in + params.weights.size(), x.end(), p->bias.begin());
  };
  ScalarFn fn = [&](const std::vector<double>& x) {
    FeatureMap in;
    ConvParams p;
    split(x, &in, &p);
    return dot(deconv_forward(in, p, target, target).v, proj);
  };
  FeatureMap in;
  ConvParams p;
  split(point, &in, &p);
  ConvGrads cg;
  FeatureMap gin = deconv_backward(in, p, target, target, to_map(proj, c_out, target, target), &cg);
  std::vector<double> analytic = gin.v;
  analytic.insert(analytic.end(), cg.weights.begin(), cg.weights.end());
  analytic.insert(analytic.end(), cg.bias.begin(), cg.bias.end());
  return run_instance(fn, point, analytic, corrupt, rng);
}

double check_relu(Rng* rng, bool corrupt) {
  int c = 2, h = 4, w = 4;
  std::vector<double> point = rand_vec_away_from_zero(static_cast<size_t>(c) * h * w, rng);
  std::vector<double> proj = rand_vec(point.size(), -1.0, 1.0, rng);
  ScalarFn fn = [&](const std::vector<double>& x) { return dot(relu_forward(to_map(x, c, h, w)).v, proj); };
  FeatureMap gin = relu_backward(to_map(point, c, h, w), to_map(proj, c, h, w));
  return run_instance(fn, point, gin.v, corrupt, rng);
}

double check_softmax_ce(Rng* rng, bool corrupt) {
  int k = 3 + rng->uniform_int(4);
  int label = rng->uniform_int(k);
  std::vector<double> point = rand_vec(k, -2.0, 2.0, rng);
  ScalarFn fn = [&](const std::vector<double>& x) { return cross_entropy_loss(softmax_forward(x), label); };
  std::vector<double> analytic = softmax_cross_entropy_backward(softmax_forward(point), label);
  return run_instance(fn, point, analytic, corrupt, rng);
}

double check_gap(Rng* rng, bool corrupt) {
  int c = 3, h = 4, w = 5;
  std::vector<double> point = rand_vec(static_cast<size_t>(c) * h * w, -1.0, 1.0, rng);
  std::vector<double> proj = rand_vec(point.size(), -1.0, 1.0, rng);
  ScalarFn fn = [&](const std::vector<double>& x) { return dot(global_average_pool_unpool(to_map(x, c, h, w)).v, proj); };
  FeatureMap gin = global_average_pool_unpool_backward(to_map(point, c, h, w), to_map(proj, c, h, w));
  return run_instance(fn, point, gin.v, corrupt, rng);
}

double check_maxpool(Rng* rng, bool corrupt) {
  int c = 2, h = 6, w = 6;
  std::vector<double> point = rand_vec(static_cast<size_t>(c) * h * w, -1.0, 1.0, rng);
  std::vector<double> proj = rand_vec(static_cast<size_t>(c) * (h / 2) * (w / 2), -1.0, 1.0, rng);
  ScalarFn fn = [&](const std::vector<double>& x) {
    std::vector<int> am;
    return dot(maxpool2x2_forward(to_map(x, c, h, w), &am).v, proj);
  };
  std::vector<int> am;
  FeatureMap in = to_map(point, c, h, w);
  maxpool2x2_forward(in, &am);
  FeatureMap gin = maxpool2x2_backward(in, to_map(proj, c, h / 2, w / 2), am);
  return run_instance(fn, point, gin.v, corrupt, rng);
}

double check_l2norm_rescale(NormMode mode, Rng* rng, bool corrupt) {
  int c = 3, h = 3, w = 3;
  size_t n_desc = static_cast<size_t>(c) * h * w;
  std::vector<double> point = rand_vec(n_desc + c, -1.0, 1.0, rng);
  for (size_t i = n_desc; i < point.size(); ++i) point[i] = rng->uniform(0.5, 2.0);  // scales
  std::vector<double> proj = rand_vec(n_desc, -1.0, 1.0, rng);

  ScalarFn fn = [&](const std::vector<double>& x) {
    FeatureMap d = to_map(x, c, h, w);
    std::vector<double> scales(x.begin() + n_desc, x.end());
    return dot(rescale(l2_normalize(d, mode), scales).v, proj);
  };
  FeatureMap d = to_map(point, c, h, w);
  std::vector<double> scales(point.begin() + n_desc, point.end());
  FeatureMap normd = l2_normalize(d, mode);
  std::vector<double> g_scales;
  FeatureMap g_norm = rescale_backward(normd, scales, to_map(proj, c, h, w), &g_scales);
  FeatureMap g_desc = l2_normalize_backward(d, mode, g_norm);
  std::vector<double> analytic = g_desc.v;
  analytic.insert(analytic.end(), g_scales.begin(), g_scales.end());
  return run_instance(fn, point, analytic, corrupt, rng);
}

double check_roi_pool(Rng* rng, bool corrupt) {
  int c = 2, h = 9, w = 9, stride = 4, pooled = 3;
  RoiBox roi;
  roi.x1 = rng->uniform(0.0, 12.0);
  roi.y1 = rng->uniform(0.0, 12.0);
  roi.x2 = roi.x1 + rng->uniform(8.0, 22.0);
  roi.y2 = roi.y1 + rng->uniform(8.0, 22.0);
  std::vector<double> point = rand_vec(static_cast<size_t>(c) * h * w, -1.0, 1.0, rng);
  std::vector<double> proj = rand_vec(static_cast<size_t>(c) * pooled * pooled, -1.0, 1.0, rng);

  ScalarFn fn = [&](const std::vector<double>& x) {
    return dot(roi_max_pool(to_map(x, c, h, w), roi, stride, pooled, pooled).pooled.v, proj);
  };
  RoiPoolResult r = roi_max_pool(to_map(point, c, h, w), roi, stride, pooled, pooled);
  FeatureMap gin(c, h, w);
  roi_max_pool_backward(r, to_map(proj, c, pooled, pooled), &gin);
  return run_instance(fn, point, gin.v, corrupt, rng);
}

double check_irnn_direction(bool learned, Rng* rng, bool corrupt) {
  int hd = 2 + rng->uniform_int(2);
  int h = 4, w = 5;
  Direction dir = static_cast<Direction>(rng->uniform_int(4));
  IrnnDirectionParams params = IrnnDirectionParams::identity_init(hd, learned, /*use_b0=*/true);
  size_t n_seed = static_cast<size_t>(hd) * h * w;
  size_t n_whh = params.whh.size();

  std::vector<double> point = rand_vec_away_from_zero(n_seed, rng);
  if (learned) {
    // Perturbed identity keeps the recurrence well-conditioned.
    for (size_t i = 0; i < n_whh; ++i) point.push_back(params.whh[i] + rng->uniform(-0.3, 0.3));
  }
  for (int i = 0; i < hd; ++i) point.push_back(rng->uniform(-0.5, 0.5));  // b0
  std::vector<double> proj = rand_vec(n_seed, -1.0, 1.0, rng);

  auto split = [&](const std::vector<double>& x, FeatureMap* seeded, IrnnDirectionParams* p) {
    *seeded = to_map(x, hd, h, w);
    *p = params;
    if (learned) std::copy(x.begin() + n_seed, x.begin() + n_seed + n_whh, p->whh.begin());
    std::copy(x.end() - hd, x.end(), p->first_step_bias.begin());
  };
  ScalarFn fn = [&](const std::vector<double>& x) {
    FeatureMap seeded;
    IrnnDirectionParams p;
    split(x, &seeded, &p);
    return dot(irnn_direction_forward(seeded, dir, p).v, proj);
  };
  FeatureMap seeded;
  IrnnDirectionParams p;
  split(point, &seeded, &p);
  FeatureMap out = irnn_direction_forward(seeded, dir, p);
  IrnnDirectionGrads dg;
  FeatureMap g_seed = irnn_direction_backward(out, to_map(proj, hd, h, w), dir, p, &dg);
  std::vector<double> analytic = g_seed.v;
  analytic.insert(analytic.end(), dg.whh.begin(), dg.whh.end());
  analytic.insert(analytic.end(), dg.first_step_bias.begin(), dg.first_step_bias.end());
  return run_instance(fn, point, analytic, corrupt, rng);
}

// Flatten/unflatten every parameter of a block so the whole structure can be
// checked in one pass.
std::vector<double> pack_block(const IrnnBlockParams& block) {
  std::vector<double> flat;
  for (const IrnnLayerParams& l : block.layers) {
    flat.insert(flat.end(), l.input_to_hidden.weights.begin(), l.input_to_hidden.weights.end());
    flat.insert(flat.end(), l.input_to_hidden.bias.begin(), l.input_to_hidden.bias.end());
    for (const IrnnDirectionParams& d : l.per_dir) {
      flat.insert(flat.end(), d.whh.begin(), d.whh.end());
      flat.insert(flat.end(), d.first_step_bias.begin(), d.first_step_bias.end());
    }
    flat.insert(flat.end(), l.reduce.weights.begin(), l.reduce.weights.end());
    flat.insert(flat.end(), l.reduce.bias.begin(), l.reduce.bias.end());
  }
  return flat;
}

void unpack_block(const std::vector<double>& flat, size_t offset, IrnnBlockParams* block) {
  size_t i = offset;
  auto take = [&](std::vector<double>* dst) {
    std::copy(flat.begin() + i, flat.begin() + i + dst->size(), dst->begin());
    i += dst->size();
  };
  for (IrnnLayerParams& l : block->layers) {
    take(&l.input_to_hidden.weights);
    take(&l.input_to_hidden.bias);
    for (IrnnDirectionParams& d : l.per_dir) {
      take(&d.whh);
      take(&d.first_step_bias);
    }
    take(&l.reduce.weights);
    take(&l.reduce.bias);
  }
}

std::vector<double> pack_block_grads(const IrnnBlockGrads& grads) {
  std::vector<double> flat;
  for (const IrnnLayerGrads& l : grads.layers) {
    flat.insert(flat.end(), l.input_to_hidden.weights.begin(), l.input_to_hidden.weights.end());
    flat.insert(flat.end(), l.input_to_hidden.bias.begin(), l.input_to_hidden.bias.end());
    for (const IrnnDirectionGrads& d : l.per_dir) {
      flat.insert(flat.end(), d.whh.begin(), d.whh.end());
      flat.insert(flat.end(), d.first_step_bias.begin(), d.first_step_bias.end());
    }
    flat.insert(flat.end(), l.reduce.weights.begin(), l.reduce.weights.end());
    flat.insert(flat.end(), l.reduce.bias.begin(), l.reduce.bias.end());
  }
  return flat;
}

double check_irnn_block(Rng* rng, bool corrupt) {
  int in_c = 2, h = 4, w = 5;
  IrnnBlockConfig cfg;
  cfg.hidden_units = 3;
  cfg.num_layers = 2;
  cfg.out_channels = 2;
  cfg.learn_whh = rng->uniform01() < 0.5;
  cfg.use_first_step_bias = true;
  cfg.dropout_p = 0.0;
  IrnnBlockParams block = make_irnn_block(in_c, cfg, rng);
  // Shake the parameters off their identity/zero initialization.
  std::vector<double> flat = pack_block(block);
  for (double& x : flat) x += rng->uniform(-0.2, 0.2);
  unpack_block(flat, 0, &block);

  size_t n_in = static_cast<size_t>(in_c) * h * w;
  std::vector<double> point = rand_vec_away_from_zero(n_in, rng);
  point.insert(point.end(), flat.begin(), flat.end());
  std::vector<double> proj = rand_vec(static_cast<size_t>(cfg.out_channels) * h * w, -1.0, 1.0, rng);

  ScalarFn fn = [&](const std::vector<double>& x) {
    IrnnBlockParams b = block;
    unpack_block(x, n_in, &b);
    return dot(irnn_block_forward(to_map(x, in_c, h, w), b, false, nullptr, nullptr).v, proj);
  };
  IrnnBlockCache cache;
  irnn_block_forward(to_map(point, in_c, h, w), block, false, nullptr, &cache);
  IrnnBlockGrads bg;
  FeatureMap gin = irnn_block_backward(block, cache, to_map(proj, cfg.out_channels, h, w), &bg);
  std::vector<double> analytic = gin.v;
  std::vector<double> pg = pack_block_grads(bg);
  analytic.insert(analytic.end(), pg.begin(), pg.end());
  return run_instance(fn, point, analytic, corrupt, rng);
}

double check_seg_head(Rng* rng, bool corrupt) {
  int ctx_c = 2, h = 2, w = 2, classes = 3, factor = 4;
  SegHeadParams seg = make_seg_head(ctx_c, classes, factor, rng);
  for (double& x : seg.deconv.weights) x += rng->uniform(-0.05, 0.05);
  int th = h * factor, tw = w * factor;
  std::vector<int> labels(static_cast<size_t>(th) * tw);
  for (int& l : labels) {
    int pick = rng->uniform_int(classes + 1);
    l = (pick == classes) ? kSegIgnoreLabel : pick;
  }

  size_t n_ctx = static_cast<size_t>(ctx_c) * h * w;
  std::vector<double> point = rand_vec(n_ctx, -1.0, 1.0, rng);
  point.insert(point.end(), seg.score.weights.begin(), seg.score.weights.end());
  point.insert(point.end(), seg.score.bias.begin(), seg.score.bias.end());
  point.insert(point.end(), seg.deconv.weights.begin(), seg.deconv.weights.end());
  point.insert(point.end(), seg.deconv.bias.begin(), seg.deconv.bias.end());

  auto split = [&](const std::vector<double>& x, FeatureMap* ctx, SegHeadParams* p) {
    *ctx = to_map(x, ctx_c, h, w);
    *p = seg;
    size_t i = n_ctx;
    auto take = [&](std::vector<double>* dst) {
      std::copy(x.begin() + i, x.begin() + i + dst->size(), dst->begin());
      i += dst->size();
    };
    take(&p->score.weights);
    take(&p->score.bias);
    take(&p->deconv.weights);
    take(&p->deconv.bias);
  };
  ScalarFn fn = [&](const std::vector<double>& x) {
    FeatureMap ctx;
    SegHeadParams p;
    split(x, &ctx, &p);
    return seg_head_forward(ctx, p, &labels).loss;
  };
  FeatureMap ctx;
  SegHeadParams p;
  split(point, &ctx, &p);
  SegHeadResult res = seg_head_forward(ctx, p, &labels);
  SegHeadGrads sg;
  FeatureMap g_ctx = seg_head_backward(ctx, p, res, labels, &sg);
  std::vector<double> analytic = g_ctx.v;
  analytic.insert(analytic.end(), sg.score.weights.begin(), sg.score.weights.end());
  analytic.insert(analytic.end(), sg.score.bias.begin(), sg.score.bias.end());
  analytic.insert(analytic.end(), sg.deconv.weights.begin(), sg.deconv.weights.end());
  analytic.insert(analytic.end(), sg.deconv.bias.begin(), sg.deconv.bias.end());
  return run_instance(fn, point, analytic, corrupt, rng);
}

double check_fc_head(Rng* rng, bool corrupt) {
  int dim = 8, fc = 5, k = 2, n = 3;
  HeadParams head = make_head(dim, fc, k, 0.0, rng);

  std::vector<double> point = rand_vec(static_cast<size_t>(dim) * n, -1.0, 1.0, rng);
  auto push_dense = [&](const Dense& d) {
    point.insert(point.end(), d.w.begin(), d.w.end());
    std::vector<double> b = rand_vec(d.b.size(), -0.3, 0.3, rng);
    point.insert(point.end(), b.begin(), b.end());
  };
  push_dense(head.fc6);
  push_dense(head.fc7);
  push_dense(head.cls_out);
  push_dense(head.bbox_out);

  std::vector<double> proj_logits = rand_vec(static_cast<size_t>(k + 1) * n, -1.0, 1.0, rng);
  std::vector<double> proj_deltas = rand_vec(static_cast<size_t>(4 * k) * n, -1.0, 1.0, rng);

  auto split = [&](const std::vector<double>& x, std::vector<double>* desc, HeadParams* p) {
    desc->assign(x.begin(), x.begin() + static_cast<size_t>(dim) * n);
    *p = head;
    size_t i = desc->size();
    auto take = [&](std::vector<double>* dst) {
      std::copy(x.begin() + i, x.begin() + i + dst->size(), dst->begin());
      i += dst->size();
    };
    take(&p->fc6.w);
    take(&p->fc6.b);
    take(&p->fc7.w);
    take(&p->fc7.b);
    take(&p->cls_out.w);
    take(&p->cls_out.b);
    take(&p->bbox_out.w);
    take(&p->bbox_out.b);
  };
  ScalarFn fn = [&](const std::vector<double>& x) {
    std::vector<double> desc;
    HeadParams p;
    split(x, &desc, &p);
    HeadCache hc;
    head_forward(p, desc, n, false, nullptr, &hc);
    return dot(hc.logits, proj_logits) + dot(hc.deltas, proj_deltas);
  };
  std::vector<double> desc;
  HeadParams p;
  split(point, &desc, &p);
  HeadCache hc;
  head_forward(p, desc, n, false, nullptr, &hc);
  HeadGrads hg;
  std::vector<double> g_desc = head_backward(p, hc, proj_logits, proj_deltas, &hg);
  std::vector<double> analytic = g_desc;
  auto push_grads = [&](const DenseGrads& g) {
    analytic.insert(analytic.end(), g.w.begin(), g.w.end());
    analytic.insert(analytic.end(), g.b.begin(), g.b.end());
  };
  push_grads(hg.fc6);
  push_grads(hg.fc7);
  push_grads(hg.cls_out);
  push_grads(hg.bbox_out);
  return run_instance(fn, point, analytic, corrupt, rng);
}

double check_multitask_loss(Rng* rng, bool corrupt) {
  int k = 3, n = 4;
  std::vector<RoiTarget> targets(n);
  targets[0].label = 0;
  for (int j = 1; j < n; ++j) {
    targets[j].label = 1 + rng->uniform_int(k);
    targets[j].delta = {rng->uniform(-0.4, 0.4), rng->uniform(-0.4, 0.4), rng->uniform(-0.4, 0.4),
                        rng->uniform(-0.4, 0.4)};
  }
  size_t n_logits = static_cast<size_t>(k + 1) * n;
  std::vector<double> point = rand_vec(n_logits + static_cast<size_t>(4 * k) * n, -1.5, 1.5, rng);

  auto eval = [&](const std::vector<double>& x) {
    std::vector<double> logits(x.begin(), x.begin() + n_logits);
    std::vector<double> deltas(x.begin() + n_logits, x.end());
    std::vector<double> probs(n_logits);
    std::vector<double> col(k + 1);
    for (int j = 0; j < n; ++j) {
      for (int c = 0; c <= k; ++c) col[c] = logits[static_cast<size_t>(c) * n + j];
      std::vector<double> pr = softmax_forward(col);
      for (int c = 0; c <= k; ++c) probs[static_cast<size_t>(c) * n + j] = pr[c];
    }
    return multitask_loss(probs, deltas, n, k, targets);
  };
  ScalarFn fn = [&](const std::vector<double>& x) { return eval(x).total; };
  MultitaskLoss ml = eval(point);
  std::vector<double> analytic = ml.grad_logits;
  analytic.insert(analytic.end(), ml.grad_deltas.begin(), ml.grad_deltas.end());
  return run_instance(fn, point, analytic, corrupt, rng);
}

struct SuiteEntry {
  const char* name;
  double (*runner)(Rng*, bool);
};

double run_l2_blob(Rng* rng, bool corrupt) { return check_l2norm_rescale(NormMode::kSumOverAllEntries, rng, corrupt); }
double run_l2_channel(Rng* rng, bool corrupt) {
  return check_l2norm_rescale(NormMode::kSumAcrossChannels, rng, corrupt);
}
double run_irnn_learned(Rng* rng, bool corrupt) { return check_irnn_direction(true, rng, corrupt); }
double run_irnn_accum(Rng* rng, bool corrupt) { return check_irnn_direction(false, rng, corrupt); }

const SuiteEntry kSuite[] = {
    {"conv2d", check_conv2d},
    {"deconv_upsample", check_deconv},
    {"relu", check_relu},
    {"softmax_cross_entropy", check_softmax_ce},
    {"global_average_pool", check_gap},
    {"maxpool2x2", check_maxpool},
    {"l2_normalize_rescale_blob", run_l2_blob},
    {"l2_normalize_rescale_channel", run_l2_channel},
    {"roi_max_pool", check_roi_pool},
    {"irnn_direction_learned", run_irnn_learned},
    {"irnn_direction_accumulator", run_irnn_accum},
    {"irnn_block", check_irnn_block},
    {"seg_head", check_seg_head},
    {"fc_head", check_fc_head},
    {"multitask_loss", check_multitask_loss},
};

}  // namespace

std::vector<std::string> gradcheck_op_names() {
  std::vector<std::string> names;
  for (const SuiteEntry& e : kSuite) names.push_back(e.name);
  return names;
}

std::vector<GradCheckReport> run_gradcheck_suite(int instances_per_op, uint64_t seed, const std::string& corrupt_op) {
  check(instances_per_op >= 1, "run_gradcheck_suite: need at least one instance per op");
  std::vector<GradCheckReport> reports;
  Rng master(seed);
  for (const SuiteEntry& entry : kSuite) {
    bool corrupt = corrupt_op == entry.name;
    GradCheckReport r;
    r.op_name = entry.name;
    r.epsilon = kEps;
    r.num_probes = instances_per_op;
    for (int i = 0; i < instances_per_op; ++i) {
      Rng rng = master.fork(static_cast<uint64_t>(i) + 1);
      r.max_rel_error = std::max(r.max_rel_error, entry.runner(&rng, corrupt));
    }
    reports.push_back(r);
  }
  return reports;
}

}  // namespace ion
