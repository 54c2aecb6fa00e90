#include "ion/detect_head.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "ion/ops.hpp"

namespace ion {

namespace {
using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

// Column-wise dropout over a feature-major activation matrix.
void dropout_cols(std::vector<double>* a, double p, bool training, Rng* rng, std::vector<uint8_t>* mask) {
  if (!training || p == 0.0) {
    mask->assign(a->size(), 1);
    return;
  }
  mask->assign(a->size(), 0);
  double keep_scale = 1.0 / (1.0 - p);
  for (size_t i = 0; i < a->size(); ++i) {
    if (rng->uniform01() >= p) {
      (*mask)[i] = 1;
      (*a)[i] *= keep_scale;
    } else {
      (*a)[i] = 0.0;
    }
  }
}

void dropout_cols_backward(std::vector<double>* g, double p, bool training, const std::vector<uint8_t>& mask) {
  if (!training || p == 0.0) return;
  double keep_scale = 1.0 / (1.0 - p);
  for (size_t i = 0; i < g->size(); ++i) (*g)[i] = mask[i] ? (*g)[i] * keep_scale : 0.0;
}

}  // namespace

Dense make_dense(int in, int out, Rng* rng) {
  Dense d;
  d.in = in;
  d.out = out;
  d.w = xavier_init(in, out, static_cast<size_t>(in) * out, rng);
  d.b.assign(out, 0.0);
  return d;
}

std::vector<double> dense_forward(const Dense& d, const std::vector<double>& x, int n) {
  check(x.size() == static_cast<size_t>(d.in) * n, "dense_forward: input size mismatch");
  std::vector<double> y(static_cast<size_t>(d.out) * n);
  ConstMapRM wm(d.w.data(), d.out, d.in);
  ConstMapRM xm(x.data(), d.in, n);
  MapRM ym(y.data(), d.out, n);
  ym.noalias() = wm * xm;
  for (int o = 0; o < d.out; ++o) {
    double b = d.b[o];
    for (int j = 0; j < n; ++j) y[static_cast<size_t>(o) * n + j] += b;
  }
  return y;
}

std::vector<double> dense_backward(const Dense& d, const std::vector<double>& x, const std::vector<double>& grad_y,
                                   int n, DenseGrads* grads) {
  check(grad_y.size() == static_cast<size_t>(d.out) * n, "dense_backward: grad size mismatch");
  grads->w.assign(d.w.size(), 0.0);
  grads->b.assign(d.b.size(), 0.0);
  std::vector<double> gx(static_cast<size_t>(d.in) * n);
  ConstMapRM wm(d.w.data(), d.out, d.in);
  ConstMapRM xm(x.data(), d.in, n);
  ConstMapRM gym(grad_y.data(), d.out, n);
  MapRM gwm(grads->w.data(), d.out, d.in);
  MapRM gxm(gx.data(), d.in, n);
  gwm.noalias() = gym * xm.transpose();
  gxm.noalias() = wm.transpose() * gym;
  for (int o = 0; o < d.out; ++o) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += grad_y[static_cast<size_t>(o) * n + j];
    grads->b[o] = s;
  }
  return gx;
}

HeadParams make_head(int descriptor_dim, int fc_dim, int num_classes, double dropout_p, Rng* rng) {
  check(num_classes >= 1, "make_head: need at least one foreground class");
  HeadParams p;
  p.num_classes = num_classes;
  p.dropout_p = dropout_p;
  p.fc6 = make_dense(descriptor_dim, fc_dim, rng);
  p.fc7 = make_dense(fc_dim, fc_dim, rng);
  p.cls_out = make_dense(fc_dim, num_classes + 1, rng);
  p.bbox_out = make_dense(fc_dim, 4 * num_classes, rng);
  return p;
}

void head_forward(const HeadParams& p, const std::vector<double>& descriptors, int n, bool training, Rng* rng,
                  HeadCache* cache) {
  cache->n = n;
  cache->training = training;
  cache->x0 = descriptors;
  cache->a6 = dense_forward(p.fc6, cache->x0, n);
  cache->h6 = cache->a6;
  relu_inplace(&cache->h6);
  dropout_cols(&cache->h6, p.dropout_p, training, rng, &cache->m6);
  cache->a7 = dense_forward(p.fc7, cache->h6, n);
  cache->h7 = cache->a7;
  relu_inplace(&cache->h7);
  dropout_cols(&cache->h7, p.dropout_p, training, rng, &cache->m7);
  cache->logits = dense_forward(p.cls_out, cache->h7, n);
  cache->deltas = dense_forward(p.bbox_out, cache->h7, n);

  const int k1 = p.num_classes + 1;
  cache->probs.assign(cache->logits.size(), 0.0);
  std::vector<double> col(k1);
  for (int j = 0; j < n; ++j) {
    for (int c = 0; c < k1; ++c) col[c] = cache->logits[static_cast<size_t>(c) * n + j];
    std::vector<double> probs = softmax_forward(col);
    for (int c = 0; c < k1; ++c) cache->probs[static_cast<size_t>(c) * n + j] = probs[c];
  }
}

std::vector<double> head_backward(const HeadParams& p, const HeadCache& cache, const std::vector<double>& grad_logits,
                                  const std::vector<double>& grad_deltas, HeadGrads* grads) {
  const int n = cache.n;
  std::vector<double> g7 = dense_backward(p.cls_out, cache.h7, grad_logits, n, &grads->cls_out);
  std::vector<double> g7b = dense_backward(p.bbox_out, cache.h7, grad_deltas, n, &grads->bbox_out);
  for (size_t i = 0; i < g7.size(); ++i) g7[i] += g7b[i];
  dropout_cols_backward(&g7, p.dropout_p, cache.training, cache.m7);
  for (size_t i = 0; i < g7.size(); ++i) {
    if (cache.a7[i] <= 0.0) g7[i] = 0.0;
  }
  std::vector<double> g6 = dense_backward(p.fc7, cache.h6, g7, n, &grads->fc7);
  dropout_cols_backward(&g6, p.dropout_p, cache.training, cache.m6);
  for (size_t i = 0; i < g6.size(); ++i) {
    if (cache.a6[i] <= 0.0) g6[i] = 0.0;
  }
  return dense_backward(p.fc6, cache.x0, g6, n, &grads->fc6);
}

double smooth_l1(double x) {
  double ax = std::abs(x);
  return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

double smooth_l1_grad(double x) {
  if (x > 1.0) return 1.0;
  if (x < -1.0) return -1.0;
  return x;
}

MultitaskLoss multitask_loss(const std::vector<double>& probs, const std::vector<double>& deltas, int n,
                             int num_classes, const std::vector<RoiTarget>& targets) {
  check(static_cast<int>(targets.size()) == n, "multitask_loss: one target per ROI");
  const int k1 = num_classes + 1;
  check(probs.size() == static_cast<size_t>(k1) * n, "multitask_loss: score size mismatch");
  check(deltas.size() == static_cast<size_t>(4 * num_classes) * n, "multitask_loss: delta size mismatch");

  MultitaskLoss r;
  r.grad_logits.assign(probs.size(), 0.0);
  r.grad_deltas.assign(deltas.size(), 0.0);
  const double inv_n = 1.0 / n;

  for (int j = 0; j < n; ++j) {
    int label = targets[j].label;
    check(label >= 0 && label <= num_classes, "multitask_loss: label out of range");
    r.cls_loss += -std::log(std::max(probs[static_cast<size_t>(label) * n + j], 1e-300));
    for (int c = 0; c < k1; ++c) {
      double g = probs[static_cast<size_t>(c) * n + j];
      if (c == label) g -= 1.0;
      r.grad_logits[static_cast<size_t>(c) * n + j] = g * inv_n;
    }
    if (label > 0) {
      const double target[4] = {targets[j].delta.dx, targets[j].delta.dy, targets[j].delta.dw, targets[j].delta.dh};
      int base = 4 * (label - 1);
      for (int k = 0; k < 4; ++k) {
        double diff = deltas[static_cast<size_t>(base + k) * n + j] - target[k];
        r.bbox_loss += smooth_l1(diff);
        r.grad_deltas[static_cast<size_t>(base + k) * n + j] = smooth_l1_grad(diff) * inv_n;
      }
    }
  }
  r.cls_loss *= inv_n;
  r.bbox_loss *= inv_n;
  r.total = r.cls_loss + r.bbox_loss;
  return r;
}

}  // namespace ion
