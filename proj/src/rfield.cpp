#include "ion/rfield.hpp"

#include <cmath>
#include <functional>

#include "ion/conv.hpp"
#include "ion/irnn.hpp"
#include "ion/ops.hpp"

namespace ion {

namespace {

void make_positive(std::vector<double>* w, Rng* rng) {
  for (double& x : *w) x = rng->uniform(0.05, 0.5);
}

ConvParams positive_conv(int out_c, int in_c, int k, int pad, Rng* rng) {
  ConvParams c(out_c, in_c, k, k, 1, pad);
  make_positive(&c.weights, rng);
  return c;
}

IrnnBlockParams positive_irnn(int in_c, int hidden, bool two_direction, int layers, Rng* rng) {
  IrnnBlockConfig cfg;
  cfg.hidden_units = hidden;
  cfg.num_layers = layers;
  cfg.out_channels = in_c;
  cfg.learn_whh = false;  // accumulator path: positive inputs never clip
  cfg.use_first_step_bias = false;
  cfg.dropout_p = 0.0;
  cfg.two_direction = two_direction;
  IrnnBlockParams block = make_irnn_block(in_c, cfg, rng);
  for (IrnnLayerParams& l : block.layers) {
    make_positive(&l.input_to_hidden.weights, rng);
    make_positive(&l.reduce.weights, rng);
  }
  return block;
}

}  // namespace

std::vector<std::string> rfield_operator_names() { return {"conv3x3x2", "conv5x5x2", "gap", "irnn", "irnn2dir"}; }

RfieldReport receptive_field_probe(const std::string& op, int channels, int height, int width, uint64_t seed) {
  check(channels >= 1 && height >= 3 && width >= 3, "receptive_field_probe: map too small");
  Rng rng(seed);

  std::function<FeatureMap(const FeatureMap&)> forward;
  if (op == "conv3x3x2" || op == "conv5x5x2") {
    int k = op == "conv3x3x2" ? 3 : 5;
    ConvParams c1 = positive_conv(channels, channels, k, k / 2, &rng);
    ConvParams c2 = positive_conv(channels, channels, k, k / 2, &rng);
    forward = [c1, c2](const FeatureMap& x) {
      return relu_forward(conv2d_forward(relu_forward(conv2d_forward(x, c1)), c2));
    };
  } else if (op == "gap") {
    forward = [](const FeatureMap& x) { return global_average_pool_unpool(x); };
  } else if (op == "irnn") {
    IrnnBlockParams block = positive_irnn(channels, channels, false, 2, &rng);
    forward = [block](const FeatureMap& x) { return irnn_block_forward(x, block, false, nullptr, nullptr); };
  } else if (op == "irnn2dir") {
    // First layer of the left-right-then-up-down variant.
    IrnnBlockParams block = positive_irnn(channels, channels, true, 1, &rng);
    forward = [block](const FeatureMap& x) { return irnn_block_forward(x, block, false, nullptr, nullptr); };
  } else {
    throw std::invalid_argument("receptive_field_probe: unknown operator '" + op + "' (expected conv3x3x2, " +
                                "conv5x5x2, gap, irnn, irnn2dir)");
  }

  FeatureMap input(channels, height, width);
  for (double& x : input.v) x = rng.uniform(0.1, 1.0);

  FeatureMap base = forward(input);
  FeatureMap perturbed_in = input;
  int cy = height / 2, cx = width / 2;
  perturbed_in.at(0, cy, cx) += 0.5;
  FeatureMap perturbed = forward(perturbed_in);
  check(base.same_shape(perturbed), "receptive_field_probe: operator changed the spatial shape");

  RfieldReport r;
  r.op = op;
  r.in_height = height;
  r.in_width = width;
  r.y0 = height;
  r.x0 = width;
  r.y1 = -1;
  r.x1 = -1;

  const int plane = base.height * base.width;
  std::vector<double> max_delta(plane, 0.0);
  for (int c = 0; c < base.channels; ++c) {
    for (int i = 0; i < plane; ++i) {
      double d = std::abs(perturbed.v[static_cast<size_t>(c) * plane + i] - base.v[static_cast<size_t>(c) * plane + i]);
      max_delta[i] = std::max(max_delta[i], d);
    }
  }
  int affected = 0;
  for (int y = 0; y < base.height; ++y) {
    for (int x = 0; x < base.width; ++x) {
      if (max_delta[y * base.width + x] > 1e-9) {
        ++affected;
        r.y0 = std::min(r.y0, y);
        r.y1 = std::max(r.y1, y);
        r.x0 = std::min(r.x0, x);
        r.x1 = std::max(r.x1, x);
      }
    }
  }
  check(affected > 0, "receptive_field_probe: perturbation had no effect");
  r.window_h = r.y1 - r.y0 + 1;
  r.window_w = r.x1 - r.x0 + 1;
  r.full_image = affected == plane;

  // Spatially constant means every affected cell sees the same per-channel
  // delta (the global-average signature).
  r.spatially_constant = true;
  for (int c = 0; c < base.channels && r.spatially_constant; ++c) {
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < plane; ++i) {
      if (max_delta[i] <= 1e-9) continue;
      double d = perturbed.v[static_cast<size_t>(c) * plane + i] - base.v[static_cast<size_t>(c) * plane + i];
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    if (hi - lo > 1e-9 * std::max(1.0, std::abs(hi))) r.spatially_constant = false;
  }
  return r;
}

}  // namespace ion
