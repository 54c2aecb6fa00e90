#ifndef ION_OPS_HPP_
#define ION_OPS_HPP_

#include <functional>

#include "ion/tensor.hpp"

namespace ion {

// ReLU clamps at 0; the backward pass uses subgradient 0 at exactly 0.
// relu(x) returns canonical +0.0 for all non-positive inputs.
inline double relu(double x) { return x > 0.0 ? x : 0.0; }

FeatureMap relu_forward(const FeatureMap& input);
FeatureMap relu_backward(const FeatureMap& input, const FeatureMap& grad_out);
void relu_inplace(std::vector<double>* v);

// Numerically stable softmax over a logit vector; probabilities sum to 1.
std::vector<double> softmax_forward(const std::vector<double>& logits);
// loss = -log(probs[label]).
double cross_entropy_loss(const std::vector<double>& probs, int label);
// Gradient of cross_entropy(softmax(logits), label) w.r.t. logits: p - onehot.
std::vector<double> softmax_cross_entropy_backward(const std::vector<double>& probs, int label);

// Replaces each channel by its spatial mean, tiled back to the input shape.
FeatureMap global_average_pool_unpool(const FeatureMap& input);
FeatureMap global_average_pool_unpool_backward(const FeatureMap& input, const FeatureMap& grad_out);

// Inverted dropout: at train time kept activations are divided by (1-p) so
// inference applies no rescale. The mask is recorded for backward.
FeatureMap dropout_forward(const FeatureMap& input, double p, bool training, Rng* rng, std::vector<uint8_t>* mask);
FeatureMap dropout_backward(const FeatureMap& grad_out, double p, bool training, const std::vector<uint8_t>& mask);

// Uniform Xavier/Glorot initialization with bound sqrt(6/(fan_in+fan_out)).
std::vector<double> xavier_init(int fan_in, int fan_out, size_t count, Rng* rng);
// Conv weight helper: fan_in = in*kh*kw, fan_out = out*kh*kw.
void xavier_fill_conv(struct ConvParams* params, Rng* rng);

}  // namespace ion

#endif  // ION_OPS_HPP_
