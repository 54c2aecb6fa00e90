#ifndef ION_CONV_HPP_
#define ION_CONV_HPP_

#include "ion/tensor.hpp"

namespace ion {

// Cross-correlation parameters (no kernel flip). weights are row-major by
// (out_channel, in_channel, ky, kx); bias has one entry per out channel.
struct ConvParams {
  int out_channels = 0;
  int in_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  int stride = 1;
  int pad = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  ConvParams() = default;
  ConvParams(int out_c, int in_c, int kh, int kw, int stride_ = 1, int pad_ = 0)
      : out_channels(out_c),
        in_channels(in_c),
        kernel_h(kh),
        kernel_w(kw),
        stride(stride_),
        pad(pad_),
        weights(static_cast<size_t>(out_c) * in_c * kh * kw, 0.0),
        bias(out_c, 0.0) {}

  double& w(int oc, int ic, int ky, int kx) {
    return weights[((static_cast<size_t>(oc) * in_channels + ic) * kernel_h + ky) * kernel_w + kx];
  }
  double w(int oc, int ic, int ky, int kx) const {
    return weights[((static_cast<size_t>(oc) * in_channels + ic) * kernel_h + ky) * kernel_w + kx];
  }
  void validate() const;
};

struct ConvGrads {
  std::vector<double> weights;
  std::vector<double> bias;
};

int conv_out_dim(int in_dim, int kernel, int stride, int pad);

FeatureMap conv2d_forward(const FeatureMap& input, const ConvParams& params);
// Returns grad_input; fills grad_params (same shapes as params).
FeatureMap conv2d_backward(const FeatureMap& input, const ConvParams& params, const FeatureMap& grad_out,
                           ConvGrads* grad_params);

// Transposed convolution (upsampling). Output spatial size before cropping is
// (in-1)*stride + kernel; the result is center-cropped to target_h x target_w.
// Weight layout is the same (out, in, ky, kx) record as conv2d.
FeatureMap deconv_forward(const FeatureMap& input, const ConvParams& params, int target_h, int target_w);
FeatureMap deconv_backward(const FeatureMap& input, const ConvParams& params, int target_h, int target_w,
                           const FeatureMap& grad_out, ConvGrads* grad_params);

// Fills a (out==in)-channel transposed-conv kernel with the classic bilinear
// interpolation weights; off-diagonal channel pairs stay zero.
void fill_bilinear_kernel(ConvParams* params);

// 2x2/stride-2 max pooling used by the toy backbone. Argmax indices (linear
// per channel plane) are recorded for the backward routing.
FeatureMap maxpool2x2_forward(const FeatureMap& input, std::vector<int>* argmax);
FeatureMap maxpool2x2_backward(const FeatureMap& input, const FeatureMap& grad_out, const std::vector<int>& argmax);

}  // namespace ion

#endif  // ION_CONV_HPP_
