#include "ion/ops.hpp"

#include <algorithm>
#include <cmath>

#include "ion/conv.hpp"

namespace ion {

FeatureMap relu_forward(const FeatureMap& input) {
  FeatureMap out = input;
  for (double& x : out.v) x = relu(x);
  return out;
}

FeatureMap relu_backward(const FeatureMap& input, const FeatureMap& grad_out) {
  check(input.same_shape(grad_out), "relu_backward: shape mismatch");
  FeatureMap grad_in = grad_out;
  for (size_t i = 0; i < grad_in.v.size(); ++i) {
    if (input.v[i] <= 0.0) grad_in.v[i] = 0.0;
  }
  return grad_in;
}

void relu_inplace(std::vector<double>* v) {
  for (double& x : *v) x = relu(x);
}

std::vector<double> softmax_forward(const std::vector<double>& logits) {
  check(!logits.empty(), "softmax_forward: empty logits");
  check(all_finite(logits), "softmax_forward: non-finite logit");
  double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> probs(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - m);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

double cross_entropy_loss(const std::vector<double>& probs, int label) {
  check(label >= 0 && label < static_cast<int>(probs.size()), "cross_entropy_loss: label out of range");
  return -std::log(std::max(probs[label], 1e-300));
}

std::vector<double> softmax_cross_entropy_backward(const std::vector<double>& probs, int label) {
  check(label >= 0 && label < static_cast<int>(probs.size()), "softmax_cross_entropy_backward: label out of range");
  std::vector<double> grad = probs;
  grad[label] -= 1.0;
  return grad;
}

FeatureMap global_average_pool_unpool(const FeatureMap& input) {
  FeatureMap out(input.channels, input.height, input.width);
  const int n = input.height * input.width;
  for (int c = 0; c < input.channels; ++c) {
    double sum = 0.0;
    const double* src = input.v.data() + static_cast<size_t>(c) * n;
    for (int i = 0; i < n; ++i) sum += src[i];
    double mean = sum / n;
    double* dst = out.v.data() + static_cast<size_t>(c) * n;
    for (int i = 0; i < n; ++i) dst[i] = mean;
  }
  return out;
}

FeatureMap global_average_pool_unpool_backward(const FeatureMap& input, const FeatureMap& grad_out) {
  check(input.same_shape(grad_out), "gap backward: shape mismatch");
  FeatureMap grad_in(input.channels, input.height, input.width);
  const int n = input.height * input.width;
  for (int c = 0; c < input.channels; ++c) {
    double sum = 0.0;
    const double* src = grad_out.v.data() + static_cast<size_t>(c) * n;
    for (int i = 0; i < n; ++i) sum += src[i];
    double g = sum / n;
    double* dst = grad_in.v.data() + static_cast<size_t>(c) * n;
    for (int i = 0; i < n; ++i) dst[i] = g;
  }
  return grad_in;
}

FeatureMap dropout_forward(const FeatureMap& input, double p, bool training, Rng* rng, std::vector<uint8_t>* mask) {
  check(p >= 0.0 && p < 1.0, "dropout_forward: p must be in [0,1)");
  if (!training || p == 0.0) {
    mask->assign(input.size(), 1);
    return input;
  }
  FeatureMap out = input;
  mask->assign(input.size(), 0);
  double keep_scale = 1.0 / (1.0 - p);
  for (size_t i = 0; i < out.v.size(); ++i) {
    if (rng->uniform01() >= p) {
      (*mask)[i] = 1;
      out.v[i] *= keep_scale;
    } else {
      out.v[i] = 0.0;
    }
  }
  return out;
}

FeatureMap dropout_backward(const FeatureMap& grad_out, double p, bool training, const std::vector<uint8_t>& mask) {
  if (!training || p == 0.0) return grad_out;
  check(mask.size() == grad_out.size(), "dropout_backward: mask size mismatch");
  FeatureMap grad_in = grad_out;
  double keep_scale = 1.0 / (1.0 - p);
  for (size_t i = 0; i < grad_in.v.size(); ++i) {
    grad_in.v[i] = mask[i] ? grad_in.v[i] * keep_scale : 0.0;
  }
  return grad_in;
}

std::vector<double> xavier_init(int fan_in, int fan_out, size_t count, Rng* rng) {
  check(fan_in > 0 && fan_out > 0, "xavier_init: zero fan");
  double bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<double> out(count);
  for (double& x : out) x = rng->uniform(-bound, bound);
  return out;
}

void xavier_fill_conv(ConvParams* params, Rng* rng) {
  int fan_in = params->in_channels * params->kernel_h * params->kernel_w;
  int fan_out = params->out_channels * params->kernel_h * params->kernel_w;
  params->weights = xavier_init(fan_in, fan_out, params->weights.size(), rng);
  std::fill(params->bias.begin(), params->bias.end(), 0.0);
}

}  // namespace ion
