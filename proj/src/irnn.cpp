#include "ion/irnn.hpp"

#include <cmath>

namespace ion {

namespace {

// Sweep geometry: a direction walks `steps` positions along each of `lines`
// independent rows/columns. offset() maps (line, step) to the flat spatial
// index of the cell within one channel plane.
struct SweepGeometry {
  int lines = 0;
  int steps = 0;
  int width = 0;

  int offset(Direction dir, int line, int step) const {
    switch (dir) {
      case Direction::kRight: return line * width + step;
      case Direction::kLeft: return line * width + (steps - 1 - step);
      case Direction::kDown: return step * width + line;
      case Direction::kUp: return (steps - 1 - step) * width + line;
    }
    return 0;
  }
};

SweepGeometry geometry(const FeatureMap& m, Direction dir) {
  SweepGeometry g;
  g.width = m.width;
  if (dir == Direction::kRight || dir == Direction::kLeft) {
    g.lines = m.height;
    g.steps = m.width;
  } else {
    g.lines = m.width;
    g.steps = m.height;
  }
  return g;
}

inline void gather(const FeatureMap& m, int plane, int hd, int off, double* buf) {
  for (int u = 0; u < hd; ++u) buf[u] = m.v[static_cast<size_t>(u) * plane + off];
}

}  // namespace

const char* direction_name(Direction d) {
  switch (d) {
    case Direction::kRight: return "right";
    case Direction::kLeft: return "left";
    case Direction::kDown: return "down";
    case Direction::kUp: return "up";
  }
  return "?";
}

IrnnDirectionParams IrnnDirectionParams::identity_init(int hidden_units, bool learn_whh, bool use_b0) {
  check(hidden_units > 0, "IrnnDirectionParams: hidden_units must be positive");
  IrnnDirectionParams p;
  p.hidden_units = hidden_units;
  p.learn_whh = learn_whh;
  if (learn_whh) {
    p.whh.assign(static_cast<size_t>(hidden_units) * hidden_units, 0.0);
    for (int i = 0; i < hidden_units; ++i) p.whh[static_cast<size_t>(i) * hidden_units + i] = 1.0;
  }
  p.use_first_step_bias = use_b0;
  if (use_b0) p.first_step_bias.assign(hidden_units, 0.0);
  return p;
}

FeatureMap irnn_accumulator_forward(const FeatureMap& seeded_hidden, Direction dir,
                                    const IrnnDirectionParams& params) {
  const int hd = params.hidden_units;
  check(seeded_hidden.channels == hd, "irnn_accumulator_forward: channel count != hidden_units");
  const int plane = seeded_hidden.height * seeded_hidden.width;
  SweepGeometry g = geometry(seeded_hidden, dir);
  FeatureMap out(hd, seeded_hidden.height, seeded_hidden.width);
  const double* b0 = params.use_first_step_bias ? params.first_step_bias.data() : nullptr;

  for (int step = 0; step < g.steps; ++step) {
    for (int line = 0; line < g.lines; ++line) {
      int off = g.offset(dir, line, step);
      int prev_off = (step > 0) ? g.offset(dir, line, step - 1) : -1;
      for (int u = 0; u < hd; ++u) {
        double prev = (step > 0) ? out.v[static_cast<size_t>(u) * plane + prev_off] : (b0 ? b0[u] : 0.0);
        out.v[static_cast<size_t>(u) * plane + off] = relu(prev + seeded_hidden.v[static_cast<size_t>(u) * plane + off]);
      }
    }
  }
  return out;
}

FeatureMap irnn_direction_forward(const FeatureMap& seeded_hidden, Direction dir, const IrnnDirectionParams& params) {
  if (!params.learn_whh) return irnn_accumulator_forward(seeded_hidden, dir, params);
  const int hd = params.hidden_units;
  check(seeded_hidden.channels == hd, "irnn_direction_forward: channel count != hidden_units");
  check(params.whh.size() == static_cast<size_t>(hd) * hd, "irnn_direction_forward: whh size mismatch");
  const int plane = seeded_hidden.height * seeded_hidden.width;
  SweepGeometry g = geometry(seeded_hidden, dir);
  FeatureMap out(hd, seeded_hidden.height, seeded_hidden.width);
  std::vector<double> prev(hd);
  const double* b0 = params.use_first_step_bias ? params.first_step_bias.data() : nullptr;

  // All lines of one step are advanced together; the matrix product uses a
  // fixed k-ascending accumulation so the reference sweep can match bitwise.
  for (int step = 0; step < g.steps; ++step) {
    for (int line = 0; line < g.lines; ++line) {
      int off = g.offset(dir, line, step);
      if (step > 0) {
        gather(out, plane, hd, g.offset(dir, line, step - 1), prev.data());
      } else if (b0) {
        std::copy(params.first_step_bias.begin(), params.first_step_bias.end(), prev.begin());
      } else {
        std::fill(prev.begin(), prev.end(), 0.0);
      }
      for (int u = 0; u < hd; ++u) {
        const double* row = params.whh.data() + static_cast<size_t>(u) * hd;
        double acc = 0.0;
        for (int k = 0; k < hd; ++k) acc += row[k] * prev[k];
        out.v[static_cast<size_t>(u) * plane + off] = relu(acc + seeded_hidden.v[static_cast<size_t>(u) * plane + off]);
      }
    }
  }
  return out;
}

FeatureMap irnn_direction_forward_reference(const FeatureMap& seeded_hidden, Direction dir,
                                            const IrnnDirectionParams& params) {
  const int hd = params.hidden_units;
  check(seeded_hidden.channels == hd, "irnn_direction_forward_reference: channel count != hidden_units");
  const int plane = seeded_hidden.height * seeded_hidden.width;
  SweepGeometry g = geometry(seeded_hidden, dir);
  FeatureMap out(hd, seeded_hidden.height, seeded_hidden.width);
  std::vector<double> prev(hd);
  const double* b0 = params.use_first_step_bias ? params.first_step_bias.data() : nullptr;

  // One line at a time, one cell at a time.
  for (int line = 0; line < g.lines; ++line) {
    for (int step = 0; step < g.steps; ++step) {
      int off = g.offset(dir, line, step);
      if (step > 0) {
        gather(out, plane, hd, g.offset(dir, line, step - 1), prev.data());
      } else if (b0) {
        std::copy(params.first_step_bias.begin(), params.first_step_bias.end(), prev.begin());
      } else {
        std::fill(prev.begin(), prev.end(), 0.0);
      }
      for (int u = 0; u < hd; ++u) {
        double acc;
        if (params.learn_whh) {
          const double* row = params.whh.data() + static_cast<size_t>(u) * hd;
          acc = 0.0;
          for (int k = 0; k < hd; ++k) acc += row[k] * prev[k];
        } else {
          acc = prev[u];
        }
        out.v[static_cast<size_t>(u) * plane + off] = relu(acc + seeded_hidden.v[static_cast<size_t>(u) * plane + off]);
      }
    }
  }
  return out;
}

FeatureMap irnn_direction_backward(const FeatureMap& output, const FeatureMap& grad_out, Direction dir,
                                   const IrnnDirectionParams& params, IrnnDirectionGrads* grads) {
  const int hd = params.hidden_units;
  check(output.same_shape(grad_out), "irnn_direction_backward: shape mismatch");
  const int plane = output.height * output.width;
  SweepGeometry g = geometry(output, dir);

  grads->whh.assign(params.learn_whh ? static_cast<size_t>(hd) * hd : 0, 0.0);
  grads->first_step_bias.assign(params.use_first_step_bias ? hd : 0, 0.0);

  // dpre holds dL/d(pre-activation) per cell, filled in reverse step order.
  FeatureMap dpre(hd, output.height, output.width);
  std::vector<double> dh(hd), dpre_next(hd), prev(hd);

  for (int step = g.steps - 1; step >= 0; --step) {
    for (int line = 0; line < g.lines; ++line) {
      int off = g.offset(dir, line, step);
      if (step < g.steps - 1) {
        gather(dpre, plane, hd, g.offset(dir, line, step + 1), dpre_next.data());
      }
      for (int u = 0; u < hd; ++u) {
        double acc = grad_out.v[static_cast<size_t>(u) * plane + off];
        if (step < g.steps - 1) {
          if (params.learn_whh) {
            // feedback through whh^T
            for (int k = 0; k < hd; ++k) acc += params.whh[static_cast<size_t>(k) * hd + u] * dpre_next[k];
          } else {
            acc += dpre_next[u];
          }
        }
        dh[u] = acc;
      }
      for (int u = 0; u < hd; ++u) {
        bool active = output.v[static_cast<size_t>(u) * plane + off] > 0.0;
        dpre.v[static_cast<size_t>(u) * plane + off] = active ? dh[u] : 0.0;
      }
      if (params.learn_whh) {
        if (step > 0) {
          gather(output, plane, hd, g.offset(dir, line, step - 1), prev.data());
        } else if (params.use_first_step_bias) {
          std::copy(params.first_step_bias.begin(), params.first_step_bias.end(), prev.begin());
        } else {
          std::fill(prev.begin(), prev.end(), 0.0);
        }
        for (int u = 0; u < hd; ++u) {
          double d = dpre.v[static_cast<size_t>(u) * plane + off];
          if (d == 0.0) continue;
          double* wrow = grads->whh.data() + static_cast<size_t>(u) * hd;
          for (int k = 0; k < hd; ++k) wrow[k] += d * prev[k];
        }
      }
      if (step == 0 && params.use_first_step_bias) {
        // h_{-1} = b0, so b0 receives the gradient flowing into the initial state.
        for (int u = 0; u < hd; ++u) {
          if (params.learn_whh) {
            double acc = 0.0;
            for (int k = 0; k < hd; ++k) acc += params.whh[static_cast<size_t>(k) * hd + u] * dpre.v[static_cast<size_t>(k) * plane + off];
            grads->first_step_bias[u] += acc;
          } else {
            grads->first_step_bias[u] += dpre.v[static_cast<size_t>(u) * plane + off];
          }
        }
      }
    }
  }
  // d(pre)/d(seeded input) = 1 at every cell.
  return dpre;
}

IrnnBlockParams make_irnn_block(int in_channels, const IrnnBlockConfig& config, Rng* rng) {
  check(config.num_layers >= 1 && config.num_layers <= 3, "make_irnn_block: num_layers must be 1..3");
  IrnnBlockParams block;
  block.dropout_p = config.dropout_p;
  int out_channels = config.out_channels > 0 ? config.out_channels : in_channels;
  int layer_in = in_channels;
  for (int l = 0; l < config.num_layers; ++l) {
    IrnnLayerParams layer;
    if (config.two_direction) {
      layer.directions = (l % 2 == 0) ? std::vector<Direction>{Direction::kRight, Direction::kLeft}
                                      : std::vector<Direction>{Direction::kDown, Direction::kUp};
    } else {
      layer.directions = {Direction::kRight, Direction::kLeft, Direction::kDown, Direction::kUp};
    }
    layer.input_to_hidden = ConvParams(config.hidden_units, layer_in, 1, 1);
    xavier_fill_conv(&layer.input_to_hidden, rng);
    for (size_t d = 0; d < layer.directions.size(); ++d) {
      layer.per_dir.push_back(
          IrnnDirectionParams::identity_init(config.hidden_units, config.learn_whh, config.use_first_step_bias));
    }
    int concat_ch = static_cast<int>(layer.directions.size()) * config.hidden_units;
    layer.reduce = ConvParams(out_channels, concat_ch, 1, 1);
    xavier_fill_conv(&layer.reduce, rng);
    block.layers.push_back(std::move(layer));
    layer_in = out_channels;
  }
  return block;
}

IrnnBlockParams make_two_direction_block(int in_channels, const IrnnBlockConfig& config, Rng* rng) {
  IrnnBlockConfig c = config;
  c.two_direction = true;
  c.num_layers = 2;
  return make_irnn_block(in_channels, c, rng);
}

FeatureMap irnn_block_forward(const FeatureMap& features, const IrnnBlockParams& params, bool training, Rng* rng,
                              IrnnBlockCache* cache) {
  check(!params.layers.empty(), "irnn_block_forward: no layers");
  if (cache) {
    cache->layers.clear();
    cache->training = training;
  }
  FeatureMap x = features;
  for (const IrnnLayerParams& layer : params.layers) {
    IrnnLayerCache lc;
    lc.input = x;
    lc.seeded = conv2d_forward(x, layer.input_to_hidden);

    const int hd = layer.per_dir[0].hidden_units;
    FeatureMap concat(static_cast<int>(layer.directions.size()) * hd, x.height, x.width);
    for (size_t d = 0; d < layer.directions.size(); ++d) {
      FeatureMap out_d = irnn_direction_forward(lc.seeded, layer.directions[d], layer.per_dir[d]);
      std::copy(out_d.v.begin(), out_d.v.end(),
                concat.v.begin() + static_cast<size_t>(d) * hd * x.height * x.width);
      lc.dir_outputs.push_back(std::move(out_d));
    }
    lc.concat = std::move(concat);
    lc.reduced = conv2d_forward(lc.concat, layer.reduce);
    x = dropout_forward(lc.reduced, params.dropout_p, training, rng, &lc.dropout_mask);
    if (cache) cache->layers.push_back(std::move(lc));
  }
  return x;
}

FeatureMap irnn_block_backward(const IrnnBlockParams& params, const IrnnBlockCache& cache,
                               const FeatureMap& grad_out, IrnnBlockGrads* grads,
                               const std::vector<const FeatureMap*>* extra_output_grads) {
  check(cache.layers.size() == params.layers.size(), "irnn_block_backward: cache/params layer mismatch");
  check(extra_output_grads == nullptr || extra_output_grads->size() == params.layers.size(),
        "irnn_block_backward: one extra grad slot per layer");
  grads->layers.assign(params.layers.size(), IrnnLayerGrads{});
  FeatureMap gx = grad_out;
  for (int l = static_cast<int>(params.layers.size()) - 1; l >= 0; --l) {
    if (extra_output_grads && (*extra_output_grads)[l] != nullptr) {
      const FeatureMap& extra = *(*extra_output_grads)[l];
      check(extra.same_shape(gx), "irnn_block_backward: extra grad shape mismatch");
      for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += extra.v[i];
    }
    const IrnnLayerParams& layer = params.layers[l];
    const IrnnLayerCache& lc = cache.layers[l];
    IrnnLayerGrads& lg = grads->layers[l];

    FeatureMap g_reduced = dropout_backward(gx, params.dropout_p, cache.training, lc.dropout_mask);
    FeatureMap g_concat = conv2d_backward(lc.concat, layer.reduce, g_reduced, &lg.reduce);

    const int hd = layer.per_dir[0].hidden_units;
    const size_t plane = static_cast<size_t>(lc.input.height) * lc.input.width;
    FeatureMap g_seeded(hd, lc.input.height, lc.input.width);
    lg.per_dir.resize(layer.directions.size());
    for (size_t d = 0; d < layer.directions.size(); ++d) {
      FeatureMap g_dir(hd, lc.input.height, lc.input.width);
      std::copy(g_concat.v.begin() + static_cast<size_t>(d) * hd * plane,
                g_concat.v.begin() + static_cast<size_t>(d + 1) * hd * plane, g_dir.v.begin());
      FeatureMap g_seed_d =
          irnn_direction_backward(lc.dir_outputs[d], g_dir, layer.directions[d], layer.per_dir[d], &lg.per_dir[d]);
      for (size_t i = 0; i < g_seeded.v.size(); ++i) g_seeded.v[i] += g_seed_d.v[i];
    }
    gx = conv2d_backward(lc.input, layer.input_to_hidden, g_seeded, &lg.input_to_hidden);
  }
  return gx;
}

SegHeadParams make_seg_head(int context_channels, int num_classes, int upsample_factor, Rng* rng) {
  check(num_classes >= 2, "make_seg_head: need at least 2 classes");
  check(upsample_factor >= 2, "make_seg_head: upsample factor must be >= 2");
  SegHeadParams p;
  p.num_classes = num_classes;
  p.loss_weight = 1.0;
  p.score = ConvParams(num_classes, context_channels, 1, 1);
  xavier_fill_conv(&p.score, rng);
  p.deconv = ConvParams(num_classes, num_classes, 2 * upsample_factor, 2 * upsample_factor, upsample_factor, 0);
  fill_bilinear_kernel(&p.deconv);
  return p;
}

SegHeadResult seg_head_forward(const FeatureMap& context, const SegHeadParams& params,
                               const std::vector<int>* labels) {
  SegHeadResult r;
  r.class_scores = conv2d_forward(context, params.score);
  int target_h = context.height * params.deconv.stride;
  int target_w = context.width * params.deconv.stride;
  r.scores = deconv_forward(r.class_scores, params.deconv, target_h, target_w);
  if (labels) {
    check(labels->size() == static_cast<size_t>(target_h) * target_w, "seg_head_forward: label map size mismatch");
    const int k = params.num_classes;
    double total = 0.0;
    int counted = 0;
    std::vector<double> logits(k);
    for (int px = 0; px < target_h * target_w; ++px) {
      int label = (*labels)[px];
      if (label == kSegIgnoreLabel) continue;
      check(label >= 0 && label < k, "seg_head_forward: label class out of range");
      for (int c = 0; c < k; ++c) logits[c] = r.scores.v[static_cast<size_t>(c) * target_h * target_w + px];
      total += cross_entropy_loss(softmax_forward(logits), label);
      ++counted;
    }
    r.labeled_pixels = counted;
    r.loss = (counted > 0) ? params.loss_weight * total / counted : 0.0;
  }
  return r;
}

FeatureMap seg_head_backward(const FeatureMap& context, const SegHeadParams& params, const SegHeadResult& result,
                             const std::vector<int>& labels, SegHeadGrads* grads) {
  const int k = params.num_classes;
  const int h = result.scores.height, w = result.scores.width;
  FeatureMap g_scores(k, h, w);
  if (result.labeled_pixels > 0 && params.loss_weight != 0.0) {
    double scale = params.loss_weight / result.labeled_pixels;
    std::vector<double> logits(k);
    for (int px = 0; px < h * w; ++px) {
      int label = labels[px];
      if (label == kSegIgnoreLabel) continue;
      for (int c = 0; c < k; ++c) logits[c] = result.scores.v[static_cast<size_t>(c) * h * w + px];
      std::vector<double> g = softmax_cross_entropy_backward(softmax_forward(logits), label);
      for (int c = 0; c < k; ++c) g_scores.v[static_cast<size_t>(c) * h * w + px] = scale * g[c];
    }
  }
  FeatureMap g_class = deconv_backward(result.class_scores, params.deconv, h, w, g_scores, &grads->deconv);
  return conv2d_backward(context, params.score, g_class, &grads->score);
}

}  // namespace ion
