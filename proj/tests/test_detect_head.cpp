#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "ion/detect_head.hpp"
#include "ion/ops.hpp"

using namespace ion;

TEST_CASE("zero-weight head gives uniform class posteriors and zero deltas") {
  Rng rng(3);
  HeadParams head = make_head(8, 4, 3, 0.0, &rng);
  for (Dense* d : {&head.fc6, &head.fc7, &head.cls_out, &head.bbox_out}) {
    std::fill(d->w.begin(), d->w.end(), 0.0);
    std::fill(d->b.begin(), d->b.end(), 0.0);
  }
  std::vector<double> x(8 * 2, 0.7);
  HeadCache hc;
  head_forward(head, x, 2, false, nullptr, &hc);
  CHECK(hc.probs.size() == 4u * 2);   // K+1 = 4
  CHECK(hc.deltas.size() == 12u * 2); // 4K = 12
  for (double p : hc.probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-13));
  for (double d : hc.deltas) CHECK(d == 0.0);
}

TEST_CASE("per-ROI class posteriors sum to one") {
  Rng rng(5);
  HeadParams head = make_head(10, 6, 4, 0.0, &rng);
  std::vector<double> x(10 * 5);
  for (double& v : x) v = rng.uniform(-1, 1);
  HeadCache hc;
  head_forward(head, x, 5, false, nullptr, &hc);
  for (int j = 0; j < 5; ++j) {
    double s = 0;
    for (int c = 0; c < 5; ++c) s += hc.probs[c * 5 + j];
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("encode/decode deltas") {
  RoiBox p{0, 0, 0, 10, 10};

  SUBCASE("identity when target equals proposal") {
    BoxDelta d = encode_delta(p, p);
    CHECK(d.dx == 0.0);
    CHECK(d.dy == 0.0);
    CHECK(d.dw == 0.0);
    CHECK(d.dh == 0.0);
  }
  SUBCASE("shift by half the proposal size") {
    RoiBox t{0, 5, 5, 15, 15};
    BoxDelta d = encode_delta(p, t);
    CHECK(d.dx == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d.dy == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d.dw == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(d.dh == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("decode is the exact inverse inside the clamp region") {
    Rng rng(7);
    for (int t = 0; t < 10000; ++t) {
      RoiBox prop;
      prop.x1 = rng.uniform(-20, 20);
      prop.y1 = rng.uniform(-20, 20);
      prop.x2 = prop.x1 + rng.uniform(0.5, 40);
      prop.y2 = prop.y1 + rng.uniform(0.5, 40);
      RoiBox target;
      target.x1 = rng.uniform(-20, 20);
      target.y1 = rng.uniform(-20, 20);
      // size ratio within exp(+-4)
      target.x2 = target.x1 + prop.width() * std::exp(rng.uniform(-3.5, 3.5));
      target.y2 = target.y1 + prop.height() * std::exp(rng.uniform(-3.5, 3.5));
      RoiBox rt = decode_delta(prop, encode_delta(prop, target));
      CHECK(std::abs(rt.x1 - target.x1) < 1e-9);
      CHECK(std::abs(rt.y1 - target.y1) < 1e-9);
      CHECK(std::abs(rt.x2 - target.x2) < 1e-9);
      CHECK(std::abs(rt.y2 - target.y2) < 1e-9);
    }
  }
  SUBCASE("degenerate proposal is rejected") {
    RoiBox zero{0, 3, 3, 3, 8};
    CHECK_THROWS_AS(encode_delta(zero, p), std::invalid_argument);
    CHECK_THROWS_AS(decode_delta(zero, BoxDelta{}), std::invalid_argument);
  }
  SUBCASE("dw/dh are clamped at decode (exp-overflow guard)") {
    BoxDelta wild{0, 0, 50.0, -50.0};
    RoiBox out = decode_delta(p, wild);
    CHECK(out.width() == doctest::Approx(10.0 * std::exp(4.0)).epsilon(1e-12));
    CHECK(out.height() == doctest::Approx(10.0 * std::exp(-4.0)).epsilon(1e-12));
  }
  SUBCASE("decoded box is clipped to image bounds when bounds are given") {
    BoxDelta d{2.0, 0.0, 0.0, 0.0};
    RoiBox out = decode_delta(p, d, 12.0, 12.0);
    CHECK(out.x2 <= 12.0);
    CHECK(out.x1 >= 0.0);
  }
}

TEST_CASE("smooth L1 value and slope") {
  CHECK(smooth_l1(0.5) == doctest::Approx(0.125));
  CHECK(smooth_l1(1.0) == doctest::Approx(0.5));
  CHECK(smooth_l1(2.0) == doctest::Approx(1.5));
  CHECK(smooth_l1_grad(0.5) == 0.5);
  CHECK(smooth_l1_grad(3.0) == 1.0);
  CHECK(smooth_l1_grad(-3.0) == -1.0);
}

namespace {

// Column-major-by-class logits/probs builder for n ROIs.
std::vector<double> probs_from_logits(const std::vector<double>& logits, int k1, int n) {
  std::vector<double> probs(logits.size());
  std::vector<double> col(k1);
  for (int j = 0; j < n; ++j) {
    for (int c = 0; c < k1; ++c) col[c] = logits[c * n + j];
    std::vector<double> p = softmax_forward(col);
    for (int c = 0; c < k1; ++c) probs[c * n + j] = p[c];
  }
  return probs;
}

}  // namespace

TEST_CASE("multitask loss") {
  int k = 2, n = 3;
  Rng rng(11);

  SUBCASE("all-background batch has exactly zero regression loss") {
    std::vector<RoiTarget> targets(n);  // all label 0
    std::vector<double> logits(static_cast<size_t>(k + 1) * n);
    std::vector<double> deltas(static_cast<size_t>(4 * k) * n);
    for (double& x : logits) x = rng.uniform(-1, 1);
    for (double& x : deltas) x = rng.uniform(-1, 1);
    MultitaskLoss ml = multitask_loss(probs_from_logits(logits, k + 1, n), deltas, n, k, targets);
    CHECK(ml.bbox_loss == 0.0);
    for (double g : ml.grad_deltas) CHECK(g == 0.0);
  }

  SUBCASE("perfect predictions reach the classification floor") {
    std::vector<RoiTarget> targets(n);
    targets[1].label = 2;
    targets[1].delta = {0.25, -0.1, 0.05, 0.0};
    std::vector<double> logits(static_cast<size_t>(k + 1) * n, 0.0);
    // Drive the true class logits very high -> p(label) ~= 1.
    logits[0 * n + 0] = 50;
    logits[2 * n + 1] = 50;
    logits[0 * n + 2] = 50;
    std::vector<double> deltas(static_cast<size_t>(4 * k) * n, 0.0);
    int base = 4 * (targets[1].label - 1);
    deltas[(base + 0) * n + 1] = 0.25;
    deltas[(base + 1) * n + 1] = -0.1;
    deltas[(base + 2) * n + 1] = 0.05;
    MultitaskLoss ml = multitask_loss(probs_from_logits(logits, k + 1, n), deltas, n, k, targets);
    CHECK(ml.bbox_loss == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(ml.cls_loss < 1e-9);
  }

  SUBCASE("loss is invariant to ROI ordering") {
    std::vector<RoiTarget> targets(n);
    targets[0].label = 1;
    targets[0].delta = {0.2, 0.1, -0.3, 0.4};
    targets[2].label = 2;
    targets[2].delta = {-0.1, 0.0, 0.2, -0.2};
    std::vector<double> logits(static_cast<size_t>(k + 1) * n);
    std::vector<double> deltas(static_cast<size_t>(4 * k) * n);
    for (double& x : logits) x = rng.uniform(-2, 2);
    for (double& x : deltas) x = rng.uniform(-1, 1);
    MultitaskLoss a = multitask_loss(probs_from_logits(logits, k + 1, n), deltas, n, k, targets);

    // permute ROIs (columns) as 2,0,1
    int perm[3] = {2, 0, 1};
    std::vector<double> logits_p(logits.size()), deltas_p(deltas.size());
    std::vector<RoiTarget> targets_p(n);
    for (int j = 0; j < n; ++j) {
      targets_p[j] = targets[perm[j]];
      for (int c = 0; c <= k; ++c) logits_p[c * n + j] = logits[c * n + perm[j]];
      for (int c = 0; c < 4 * k; ++c) deltas_p[c * n + j] = deltas[c * n + perm[j]];
    }
    MultitaskLoss b = multitask_loss(probs_from_logits(logits_p, k + 1, n), deltas_p, n, k, targets_p);
    CHECK(std::abs(a.total - b.total) < 1e-12);
  }

  SUBCASE("label out of range is rejected") {
    std::vector<RoiTarget> targets(n);
    targets[0].label = 5;
    std::vector<double> probs(static_cast<size_t>(k + 1) * n, 1.0 / (k + 1));
    std::vector<double> deltas(static_cast<size_t>(4 * k) * n, 0.0);
    CHECK_THROWS_AS(multitask_loss(probs, deltas, n, k, targets), std::invalid_argument);
  }
}

TEST_CASE("dense layer shapes: K=3 head emits 4 scores and 12 deltas") {
  Rng rng(13);
  HeadParams head = make_head(6, 4, 3, 0.0, &rng);
  CHECK(head.cls_out.out == 4);
  CHECK(head.bbox_out.out == 12);
}
