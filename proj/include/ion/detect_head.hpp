#ifndef ION_DETECT_HEAD_HPP_
#define ION_DETECT_HEAD_HPP_

#include <vector>

#include "ion/boxes.hpp"
#include "ion/tensor.hpp"

namespace ion {

// Fully-connected layer, weights out x in row-major.
struct Dense {
  int in = 0;
  int out = 0;
  std::vector<double> w;
  std::vector<double> b;
};

Dense make_dense(int in, int out, Rng* rng);

struct DenseGrads {
  std::vector<double> w;
  std::vector<double> b;
};

// x is feature-major (in x n); returns out x n.
std::vector<double> dense_forward(const Dense& d, const std::vector<double>& x, int n);
std::vector<double> dense_backward(const Dense& d, const std::vector<double>& x, const std::vector<double>& grad_y,
                                   int n, DenseGrads* grads);

// Per-ROI head: flatten -> fc6 -> ReLU -> dropout -> fc7 -> ReLU -> dropout
// -> parallel class scores (K+1 incl. background) and box deltas (4 per
// foreground class).
struct HeadParams {
  Dense fc6, fc7, cls_out, bbox_out;
  double dropout_p = 0.0;
  int num_classes = 0;  // K (foreground classes)
};

HeadParams make_head(int descriptor_dim, int fc_dim, int num_classes, double dropout_p, Rng* rng);

struct HeadGrads {
  DenseGrads fc6, fc7, cls_out, bbox_out;
};

struct HeadCache {
  int n = 0;
  bool training = false;
  std::vector<double> x0;             // descriptor_dim x n
  std::vector<double> a6, h6;         // fc6 pre-ReLU / post-dropout
  std::vector<double> a7, h7;
  std::vector<uint8_t> m6, m7;        // dropout masks
  std::vector<double> logits;         // (K+1) x n
  std::vector<double> probs;          // per-ROI softmax of logits
  std::vector<double> deltas;         // 4K x n
};

// descriptors: descriptor_dim x n feature-major. Scores come back as softmax
// probabilities; raw logits stay in the cache for the loss gradient.
void head_forward(const HeadParams& p, const std::vector<double>& descriptors, int n, bool training, Rng* rng,
                  HeadCache* cache);

// grad_logits: (K+1) x n, grad_deltas: 4K x n. Returns grad wrt descriptors.
std::vector<double> head_backward(const HeadParams& p, const HeadCache& cache, const std::vector<double>& grad_logits,
                                  const std::vector<double>& grad_deltas, HeadGrads* grads);

// Sampled-ROI training target; label 0 is background and carries no box.
struct RoiTarget {
  int label = 0;
  BoxDelta delta;
};

struct MultitaskLoss {
  double cls_loss = 0.0;
  double bbox_loss = 0.0;
  double total = 0.0;
  std::vector<double> grad_logits;
  std::vector<double> grad_deltas;
};

// Classification cross-entropy over every ROI plus smooth-L1 regression on
// the labeled class of foreground ROIs, both normalized by the ROI count.
MultitaskLoss multitask_loss(const std::vector<double>& probs, const std::vector<double>& deltas, int n,
                             int num_classes, const std::vector<RoiTarget>& targets);

double smooth_l1(double x);
double smooth_l1_grad(double x);

}  // namespace ion

#endif  // ION_DETECT_HEAD_HPP_
