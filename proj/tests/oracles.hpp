// Independent brute-force oracles used only by tests. These deliberately
// avoid the library's implementation strategy (im2col/gemm, batched sweeps,
// incremental suppression) so agreement is meaningful.
#ifndef ION_TESTS_ORACLES_HPP_
#define ION_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ion/boxes.hpp"
#include "ion/conv.hpp"
#include "ion/tensor.hpp"

namespace ion_test {

// Direct sextuple-loop cross-correlation.
inline ion::FeatureMap naive_conv2d(const ion::FeatureMap& in, const ion::ConvParams& p) {
  int oh = (in.height + 2 * p.pad - p.kernel_h) / p.stride + 1;
  int ow = (in.width + 2 * p.pad - p.kernel_w) / p.stride + 1;
  ion::FeatureMap out(p.out_channels, oh, ow);
  for (int oc = 0; oc < p.out_channels; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = p.bias[oc];
        for (int ic = 0; ic < p.in_channels; ++ic) {
          for (int ky = 0; ky < p.kernel_h; ++ky) {
            for (int kx = 0; kx < p.kernel_w; ++kx) {
              int iy = oy * p.stride - p.pad + ky;
              int ix = ox * p.stride - p.pad + kx;
              if (iy < 0 || iy >= in.height || ix < 0 || ix >= in.width) continue;
              acc += p.w(oc, ic, ky, kx) * in.at(ic, iy, ix);
            }
          }
        }
        out.at(oc, oy, ox) = acc;
      }
    }
  }
  return out;
}

// Transposed convolution by definition: for each output cell, sum the input
// cells whose kernel footprint covers it.
inline ion::FeatureMap naive_deconv(const ion::FeatureMap& in, const ion::ConvParams& p, int target_h, int target_w) {
  int full_h = (in.height - 1) * p.stride + p.kernel_h;
  int full_w = (in.width - 1) * p.stride + p.kernel_w;
  int off_y = (full_h - target_h) / 2;
  int off_x = (full_w - target_w) / 2;
  ion::FeatureMap out(p.out_channels, target_h, target_w);
  for (int oc = 0; oc < p.out_channels; ++oc) {
    for (int ty = 0; ty < target_h; ++ty) {
      for (int tx = 0; tx < target_w; ++tx) {
        double acc = p.bias[oc];
        int fy = ty + off_y, fx = tx + off_x;
        for (int ic = 0; ic < p.in_channels; ++ic) {
          for (int iy = 0; iy < in.height; ++iy) {
            for (int ix = 0; ix < in.width; ++ix) {
              int ky = fy - iy * p.stride, kx = fx - ix * p.stride;
              if (ky < 0 || ky >= p.kernel_h || kx < 0 || kx >= p.kernel_w) continue;
              acc += in.at(ic, iy, ix) * p.w(oc, ic, ky, kx);
            }
          }
        }
        out.at(oc, ty, tx) = acc;
      }
    }
  }
  return out;
}

// Exhaustive greedy NMS over index sets.
inline std::vector<int> brute_nms(const std::vector<ion::Detection>& dets, double thresh) {
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return a < b;
  });
  std::vector<int> kept;
  for (int i : order) {
    bool ok = true;
    for (int k : kept) {
      if (ion::iou(dets[k].box, dets[i].box) > thresh) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(i);
  }
  return kept;
}

// Direct weighted-mean voting for one kept box.
inline ion::RoiBox brute_vote(const ion::Detection& kept, const std::vector<ion::Detection>& pool, double vote_iou) {
  double w = 0.0, x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
  for (const ion::Detection& d : pool) {
    if (d.class_id != kept.class_id || d.box.image_id != kept.box.image_id) continue;
    if (ion::iou(d.box, kept.box) < vote_iou) continue;
    w += d.score;
    x1 += d.score * d.box.x1;
    y1 += d.score * d.box.y1;
    x2 += d.score * d.box.x2;
    y2 += d.score * d.box.y2;
  }
  ion::RoiBox out = kept.box;
  if (w > 0) {
    out.x1 = x1 / w;
    out.y1 = y1 / w;
    out.x2 = x2 / w;
    out.y2 = y2 / w;
  }
  return out;
}

// Brute-force ROI max pooling over the same documented bin rule.
inline ion::FeatureMap brute_roi_pool(const ion::FeatureMap& f, const ion::RoiBox& roi, int stride, int ph, int pw) {
  int cx1 = std::clamp(static_cast<int>(std::floor(roi.x1 / stride)), 0, f.width - 1);
  int cy1 = std::clamp(static_cast<int>(std::floor(roi.y1 / stride)), 0, f.height - 1);
  int cx2 = std::clamp(static_cast<int>(std::ceil(roi.x2 / stride)), cx1 + 1, f.width);
  int cy2 = std::clamp(static_cast<int>(std::ceil(roi.y2 / stride)), cy1 + 1, f.height);
  int cw = cx2 - cx1, ch = cy2 - cy1;
  ion::FeatureMap out(f.channels, ph, pw);
  for (int c = 0; c < f.channels; ++c) {
    for (int by = 0; by < ph; ++by) {
      int ys = cy1 + (by * ch) / ph, ye = cy1 + ((by + 1) * ch) / ph;
      if (ye <= ys) ye = ys + 1;
      ys = std::min(ys, cy2 - 1);
      ye = std::min(ye, cy2);
      for (int bx = 0; bx < pw; ++bx) {
        int xs = cx1 + (bx * cw) / pw, xe = cx1 + ((bx + 1) * cw) / pw;
        if (xe <= xs) xe = xs + 1;
        xs = std::min(xs, cx2 - 1);
        xe = std::min(xe, cx2);
        double best = -1e300;
        for (int y = ys; y < ye; ++y) {
          for (int x = xs; x < xe; ++x) best = std::max(best, f.at(c, y, x));
        }
        out.at(c, by, bx) = best;
      }
    }
  }
  return out;
}

inline ion::FeatureMap random_map(int c, int h, int w, double lo, double hi, ion::Rng* rng) {
  ion::FeatureMap m(c, h, w);
  for (double& x : m.v) x = rng->uniform(lo, hi);
  return m;
}

}  // namespace ion_test

#endif  // ION_TESTS_ORACLES_HPP_
