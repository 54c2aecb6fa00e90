#include "ion/conv.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

namespace ion {

namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

// Lays the input patches out as a (in_c*kh*kw) x (out_h*out_w) matrix.
void im2col(const FeatureMap& in, const ConvParams& p, int out_h, int out_w, std::vector<double>* col) {
  const int kh = p.kernel_h, kw = p.kernel_w, stride = p.stride, pad = p.pad;
  col->assign(static_cast<size_t>(in.channels) * kh * kw * out_h * out_w, 0.0);
  double* dst = col->data();
  for (int ic = 0; ic < in.channels; ++ic) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        for (int oy = 0; oy < out_h; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= in.height) {
            dst += out_w;
            continue;
          }
          for (int ox = 0; ox < out_w; ++ox) {
            int ix = ox * stride - pad + kx;
            *dst++ = (ix >= 0 && ix < in.width) ? in.at(ic, iy, ix) : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const std::vector<double>& col, const ConvParams& p, int out_h, int out_w, FeatureMap* in_grad) {
  const int kh = p.kernel_h, kw = p.kernel_w, stride = p.stride, pad = p.pad;
  const double* src = col.data();
  for (int ic = 0; ic < in_grad->channels; ++ic) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        for (int oy = 0; oy < out_h; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= in_grad->height) {
            src += out_w;
            continue;
          }
          for (int ox = 0; ox < out_w; ++ox) {
            int ix = ox * stride - pad + kx;
            double g = *src++;
            if (ix >= 0 && ix < in_grad->width) in_grad->at(ic, iy, ix) += g;
          }
        }
      }
    }
  }
}

}  // namespace

void ConvParams::validate() const {
  check(stride >= 1, "ConvParams: stride must be >= 1");
  check(pad >= 0, "ConvParams: pad must be >= 0");
  check(weights.size() == static_cast<size_t>(out_channels) * in_channels * kernel_h * kernel_w,
        "ConvParams: weight count does not match out*in*kh*kw");
  check(bias.size() == static_cast<size_t>(out_channels), "ConvParams: bias count does not match out_channels");
}

int conv_out_dim(int in_dim, int kernel, int stride, int pad) {
  int span = in_dim + 2 * pad - kernel;
  if (span < 0 || span % stride != 0) return -1;
  return span / stride + 1;
}

FeatureMap conv2d_forward(const FeatureMap& input, const ConvParams& params) {
  params.validate();
  if (input.channels != params.in_channels) {
    std::ostringstream os;
    os << "conv2d_forward: input has " << input.shape_str() << " but kernel expects " << params.in_channels
       << " input channels";
    throw std::invalid_argument(os.str());
  }
  int out_h = conv_out_dim(input.height, params.kernel_h, params.stride, params.pad);
  int out_w = conv_out_dim(input.width, params.kernel_w, params.stride, params.pad);
  if (out_h <= 0 || out_w <= 0) {
    std::ostringstream os;
    os << "conv2d_forward: input " << input.shape_str() << " with kernel " << params.kernel_h << "x"
       << params.kernel_w << " stride " << params.stride << " pad " << params.pad
       << " does not yield positive integer output dims";
    throw std::invalid_argument(os.str());
  }

  FeatureMap out(params.out_channels, out_h, out_w);
  const int k = params.in_channels * params.kernel_h * params.kernel_w;
  const int n = out_h * out_w;
  ConstMapRM w_mat(params.weights.data(), params.out_channels, k);

  if (params.kernel_h == 1 && params.kernel_w == 1 && params.stride == 1 && params.pad == 0) {
    // 1x1 stride-1: the input is already the column matrix.
    ConstMapRM x(input.v.data(), params.in_channels, n);
    MapRM y(out.v.data(), params.out_channels, n);
    y.noalias() = w_mat * x;
  } else {
    std::vector<double> col;
    im2col(input, params, out_h, out_w, &col);
    ConstMapRM x(col.data(), k, n);
    MapRM y(out.v.data(), params.out_channels, n);
    y.noalias() = w_mat * x;
  }
  for (int oc = 0; oc < params.out_channels; ++oc) {
    double b = params.bias[oc];
    double* row = out.v.data() + static_cast<size_t>(oc) * n;
    for (int i = 0; i < n; ++i) row[i] += b;
  }
  return out;
}

FeatureMap conv2d_backward(const FeatureMap& input, const ConvParams& params, const FeatureMap& grad_out,
                           ConvGrads* grad_params) {
  params.validate();
  check(input.channels == params.in_channels, "conv2d_backward: input channel mismatch");
  int out_h = conv_out_dim(input.height, params.kernel_h, params.stride, params.pad);
  int out_w = conv_out_dim(input.width, params.kernel_w, params.stride, params.pad);
  if (grad_out.channels != params.out_channels || grad_out.height != out_h || grad_out.width != out_w) {
    std::ostringstream os;
    os << "conv2d_backward: grad_out " << grad_out.shape_str() << " does not match forward output " << params.out_channels
       << "x" << out_h << "x" << out_w;
    throw std::invalid_argument(os.str());
  }

  const int k = params.in_channels * params.kernel_h * params.kernel_w;
  const int n = out_h * out_w;
  grad_params->weights.assign(params.weights.size(), 0.0);
  grad_params->bias.assign(params.bias.size(), 0.0);

  ConstMapRM gy(grad_out.v.data(), params.out_channels, n);
  ConstMapRM w_mat(params.weights.data(), params.out_channels, k);
  MapRM gw(grad_params->weights.data(), params.out_channels, k);

  for (int oc = 0; oc < params.out_channels; ++oc) {
    double s = 0.0;
    const double* row = grad_out.v.data() + static_cast<size_t>(oc) * n;
    for (int i = 0; i < n; ++i) s += row[i];
    grad_params->bias[oc] = s;
  }

  FeatureMap grad_input(input.channels, input.height, input.width);
  if (params.kernel_h == 1 && params.kernel_w == 1 && params.stride == 1 && params.pad == 0) {
    ConstMapRM x(input.v.data(), k, n);
    gw.noalias() = gy * x.transpose();
    MapRM gx(grad_input.v.data(), k, n);
    gx.noalias() = w_mat.transpose() * gy;
  } else {
    std::vector<double> col;
    im2col(input, params, out_h, out_w, &col);
    ConstMapRM x(col.data(), k, n);
    gw.noalias() = gy * x.transpose();
    std::vector<double> gcol(col.size());
    MapRM gx(gcol.data(), k, n);
    gx.noalias() = w_mat.transpose() * gy;
    col2im(gcol, params, out_h, out_w, &grad_input);
  }
  return grad_input;
}

FeatureMap deconv_forward(const FeatureMap& input, const ConvParams& params, int target_h, int target_w) {
  params.validate();
  check(input.channels == params.in_channels, "deconv_forward: input channel mismatch");
  int full_h = (input.height - 1) * params.stride + params.kernel_h;
  int full_w = (input.width - 1) * params.stride + params.kernel_w;
  check(target_h > 0 && target_w > 0 && target_h <= full_h && target_w <= full_w,
        "deconv_forward: target dims must be positive and not exceed the un-cropped output");
  // Center crop to the target size.
  int off_y = (full_h - target_h) / 2;
  int off_x = (full_w - target_w) / 2;

  FeatureMap out(params.out_channels, target_h, target_w);
  for (int ic = 0; ic < params.in_channels; ++ic) {
    for (int iy = 0; iy < input.height; ++iy) {
      for (int ix = 0; ix < input.width; ++ix) {
        double x = input.at(ic, iy, ix);
        if (x == 0.0) continue;
        for (int oc = 0; oc < params.out_channels; ++oc) {
          for (int ky = 0; ky < params.kernel_h; ++ky) {
            int oy = iy * params.stride + ky - off_y;
            if (oy < 0 || oy >= target_h) continue;
            for (int kx = 0; kx < params.kernel_w; ++kx) {
              int ox = ix * params.stride + kx - off_x;
              if (ox < 0 || ox >= target_w) continue;
              out.at(oc, oy, ox) += x * params.w(oc, ic, ky, kx);
            }
          }
        }
      }
    }
  }
  for (int oc = 0; oc < params.out_channels; ++oc) {
    double b = params.bias[oc];
    for (int i = 0; i < target_h * target_w; ++i) out.v[static_cast<size_t>(oc) * target_h * target_w + i] += b;
  }
  return out;
}

FeatureMap deconv_backward(const FeatureMap& input, const ConvParams& params, int target_h, int target_w,
                           const FeatureMap& grad_out, ConvGrads* grad_params) {
  params.validate();
  check(grad_out.channels == params.out_channels && grad_out.height == target_h && grad_out.width == target_w,
        "deconv_backward: grad_out shape mismatch");
  int full_h = (input.height - 1) * params.stride + params.kernel_h;
  int full_w = (input.width - 1) * params.stride + params.kernel_w;
  int off_y = (full_h - target_h) / 2;
  int off_x = (full_w - target_w) / 2;

  grad_params->weights.assign(params.weights.size(), 0.0);
  grad_params->bias.assign(params.bias.size(), 0.0);
  FeatureMap grad_input(input.channels, input.height, input.width);

  for (int oc = 0; oc < params.out_channels; ++oc) {
    double s = 0.0;
    const double* row = grad_out.v.data() + static_cast<size_t>(oc) * target_h * target_w;
    for (int i = 0; i < target_h * target_w; ++i) s += row[i];
    grad_params->bias[oc] = s;
  }

  for (int ic = 0; ic < params.in_channels; ++ic) {
    for (int iy = 0; iy < input.height; ++iy) {
      for (int ix = 0; ix < input.width; ++ix) {
        double x = input.at(ic, iy, ix);
        double gx = 0.0;
        for (int oc = 0; oc < params.out_channels; ++oc) {
          for (int ky = 0; ky < params.kernel_h; ++ky) {
            int oy = iy * params.stride + ky - off_y;
            if (oy < 0 || oy >= target_h) continue;
            for (int kx = 0; kx < params.kernel_w; ++kx) {
              int ox = ix * params.stride + kx - off_x;
              if (ox < 0 || ox >= target_w) continue;
              double g = grad_out.at(oc, oy, ox);
              gx += g * params.w(oc, ic, ky, kx);
              size_t wi = ((static_cast<size_t>(oc) * params.in_channels + ic) * params.kernel_h + ky) * params.kernel_w + kx;
              grad_params->weights[wi] += g * x;
            }
          }
        }
        grad_input.at(ic, iy, ix) = gx;
      }
    }
  }
  return grad_input;
}

void fill_bilinear_kernel(ConvParams* params) {
  check(params->out_channels == params->in_channels, "fill_bilinear_kernel: needs out_channels == in_channels");
  int k = params->kernel_h;
  check(params->kernel_w == k, "fill_bilinear_kernel: needs a square kernel");
  double factor = std::floor((k + 1) / 2.0);
  double center = (k % 2 == 1) ? factor - 1.0 : factor - 0.5;
  std::fill(params->weights.begin(), params->weights.end(), 0.0);
  for (int c = 0; c < params->in_channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        params->w(c, c, ky, kx) =
            (1.0 - std::abs(ky - center) / factor) * (1.0 - std::abs(kx - center) / factor);
      }
    }
  }
}

FeatureMap maxpool2x2_forward(const FeatureMap& input, std::vector<int>* argmax) {
  check(input.height % 2 == 0 && input.width % 2 == 0, "maxpool2x2_forward: dims must be even");
  int oh = input.height / 2, ow = input.width / 2;
  FeatureMap out(input.channels, oh, ow);
  argmax->assign(out.size(), -1);
  for (int c = 0; c < input.channels; ++c) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double best = -1e300;
        int best_idx = -1;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            int iy = 2 * oy + dy, ix = 2 * ox + dx;
            double val = input.at(c, iy, ix);
            if (val > best) {
              best = val;
              best_idx = iy * input.width + ix;
            }
          }
        }
        out.at(c, oy, ox) = best;
        (*argmax)[(static_cast<size_t>(c) * oh + oy) * ow + ox] = best_idx;
      }
    }
  }
  return out;
}

FeatureMap maxpool2x2_backward(const FeatureMap& input, const FeatureMap& grad_out, const std::vector<int>& argmax) {
  FeatureMap grad_input(input.channels, input.height, input.width);
  int oh = grad_out.height, ow = grad_out.width;
  check(argmax.size() == grad_out.size(), "maxpool2x2_backward: argmax size mismatch");
  for (int c = 0; c < input.channels; ++c) {
    for (int i = 0; i < oh * ow; ++i) {
      int src = argmax[static_cast<size_t>(c) * oh * ow + i];
      grad_input.v[static_cast<size_t>(c) * input.height * input.width + src] +=
          grad_out.v[static_cast<size_t>(c) * oh * ow + i];
    }
  }
  return grad_input;
}

}  // namespace ion
