#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "ion/conv.hpp"
#include "ion/gradcheck.hpp"
#include "ion/ops.hpp"
#include "oracles.hpp"

using namespace ion;
using ion_test::random_map;

TEST_CASE("conv2d 1x1 identity kernel is the identity map") {
  Rng rng(3);
  FeatureMap in = random_map(3, 4, 5, -1, 1, &rng);
  ConvParams p(3, 3, 1, 1);
  for (int c = 0; c < 3; ++c) p.w(c, c, 0, 0) = 1.0;
  FeatureMap out = conv2d_forward(in, p);
  REQUIRE(out.same_shape(in));
  for (size_t i = 0; i < in.v.size(); ++i) CHECK(out.v[i] == doctest::Approx(in.v[i]).epsilon(1e-15));
}

TEST_CASE("conv2d on all-zero input emits the bias per channel") {
  FeatureMap in(2, 3, 3);
  ConvParams p(3, 2, 3, 3, 1, 1);
  p.bias = {0.5, -1.25, 2.0};
  FeatureMap out = conv2d_forward(in, p);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 9; ++i) CHECK(out.v[c * 9 + i] == p.bias[c]);
  }
}

TEST_CASE("conv2d matches the sextuple-loop oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 8; ++trial) {
    int in_c = 1 + rng.uniform_int(3), out_c = 1 + rng.uniform_int(3);
    int k = rng.uniform01() < 0.5 ? 1 : 3;
    int pad = k == 3 ? rng.uniform_int(2) : 0;
    int stride = 1 + rng.uniform_int(2);
    int h = 5 + rng.uniform_int(3), w = 5 + rng.uniform_int(3);
    if (conv_out_dim(h, k, stride, pad) <= 0 || conv_out_dim(w, k, stride, pad) <= 0) continue;
    if ((h + 2 * pad - k) % stride != 0 || (w + 2 * pad - k) % stride != 0) continue;
    FeatureMap in = random_map(in_c, h, w, -1, 1, &rng);
    ConvParams p(out_c, in_c, k, k, stride, pad);
    for (double& x : p.weights) x = rng.uniform(-1, 1);
    for (double& b : p.bias) b = rng.uniform(-1, 1);
    FeatureMap got = conv2d_forward(in, p);
    FeatureMap want = ion_test::naive_conv2d(in, p);
    REQUIRE(got.same_shape(want));
    for (size_t i = 0; i < got.v.size(); ++i) CHECK(std::abs(got.v[i] - want.v[i]) < 1e-12);
  }
}

TEST_CASE("conv2d rejects shape mismatches with a descriptive report") {
  FeatureMap in(2, 4, 4);
  ConvParams p(1, 3, 3, 3);
  CHECK_THROWS_WITH_AS(conv2d_forward(in, p), doctest::Contains("2x4x4"), std::invalid_argument);
  ConvParams q(1, 2, 5, 5);  // output would be non-positive
  CHECK_THROWS_AS(conv2d_forward(FeatureMap(2, 4, 4), q), std::invalid_argument);
}

TEST_CASE("conv2d backward trivia") {
  Rng rng(5);
  FeatureMap in = random_map(2, 4, 4, -1, 1, &rng);
  ConvParams p(2, 2, 3, 3, 1, 1);
  for (double& x : p.weights) x = rng.uniform(-1, 1);

  SUBCASE("zero upstream gradient gives zero gradients") {
    FeatureMap gz(2, 4, 4);
    ConvGrads cg;
    FeatureMap gin = conv2d_backward(in, p, gz, &cg);
    for (double g : gin.v) CHECK(g == 0.0);
    for (double g : cg.weights) CHECK(g == 0.0);
    for (double g : cg.bias) CHECK(g == 0.0);
  }
  SUBCASE("1x1 identity conv passes the gradient through") {
    ConvParams id(2, 2, 1, 1);
    id.w(0, 0, 0, 0) = id.w(1, 1, 0, 0) = 1.0;
    FeatureMap gout = random_map(2, 4, 4, -1, 1, &rng);
    ConvGrads cg;
    FeatureMap gin = conv2d_backward(in, id, gout, &cg);
    for (size_t i = 0; i < gin.v.size(); ++i) CHECK(gin.v[i] == doctest::Approx(gout.v[i]).epsilon(1e-15));
  }
}

TEST_CASE("conv2d 1x1 equals a per-pixel matrix multiply") {
  Rng rng(17);
  int in_c = 4, out_c = 3, h = 5, w = 6;
  FeatureMap in = random_map(in_c, h, w, -2, 2, &rng);
  ConvParams p(out_c, in_c, 1, 1);
  for (double& x : p.weights) x = rng.uniform(-1, 1);
  for (double& b : p.bias) b = rng.uniform(-1, 1);
  FeatureMap out = conv2d_forward(in, p);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int oc = 0; oc < out_c; ++oc) {
        double acc = p.bias[oc];
        for (int ic = 0; ic < in_c; ++ic) acc += p.w(oc, ic, 0, 0) * in.at(ic, y, x);
        CHECK(std::abs(out.at(oc, y, x) - acc) < 1e-12);
      }
    }
  }
}

TEST_CASE("forward passes are bit-deterministic") {
  Rng rng(23);
  FeatureMap in = random_map(3, 6, 6, -1, 1, &rng);
  ConvParams p(4, 3, 3, 3, 1, 1);
  for (double& x : p.weights) x = rng.uniform(-1, 1);
  FeatureMap a = conv2d_forward(in, p);
  FeatureMap b = conv2d_forward(in, p);
  CHECK(a.v == b.v);
}

TEST_CASE("relu examples") {
  FeatureMap in(1, 1, 3);
  in.v = {-1.0, 0.0, 2.0};
  FeatureMap out = relu_forward(in);
  CHECK(out.v == std::vector<double>{0.0, 0.0, 2.0});
  // subgradient 0 at exactly 0
  FeatureMap g(1, 1, 3);
  g.v = {1.0, 1.0, 1.0};
  FeatureMap gin = relu_backward(in, g);
  CHECK(gin.v == std::vector<double>{0.0, 0.0, 1.0});
}

TEST_CASE("softmax of uniform logits is uniform; rows sum to one") {
  std::vector<double> probs = softmax_forward({0.7, 0.7, 0.7, 0.7});
  for (double p : probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-13));
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> logits(1 + rng.uniform_int(8));
    for (double& x : logits) x = rng.uniform(-30, 30);
    std::vector<double> q = softmax_forward(logits);
    double s = 0;
    for (double x : q) s += x;
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("cross entropy of a fair binary softmax is ln 2") {
  double loss = cross_entropy_loss(softmax_forward({0.0, 0.0}), 0);
  CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(cross_entropy_loss({0.5, 0.5}, 2), std::invalid_argument);
}

TEST_CASE("deconv matches the naive transposed-conv oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    int c_in = 1 + rng.uniform_int(2), c_out = 1 + rng.uniform_int(2);
    ConvParams p(c_out, c_in, 4, 4, 2, 0);
    for (double& x : p.weights) x = rng.uniform(-1, 1);
    for (double& b : p.bias) b = rng.uniform(-0.5, 0.5);
    FeatureMap in = random_map(c_in, 3, 4, -1, 1, &rng);
    int th = in.height * 2, tw = in.width * 2;
    FeatureMap got = deconv_forward(in, p, th, tw);
    FeatureMap want = ion_test::naive_deconv(in, p, th, tw);
    REQUIRE(got.same_shape(want));
    for (size_t i = 0; i < got.v.size(); ++i) CHECK(std::abs(got.v[i] - want.v[i]) < 1e-12);
  }
}

TEST_CASE("bilinear deconv kernel upsamples a constant map to a constant map") {
  ConvParams p(1, 1, 8, 8, 4, 0);
  fill_bilinear_kernel(&p);
  FeatureMap in(1, 4, 4);
  in.fill(3.5);
  FeatureMap out = deconv_forward(in, p, 16, 16);
  // Interior cells (outside the border halo) keep the constant exactly.
  for (int y = 4; y < 12; ++y) {
    for (int x = 4; x < 12; ++x) CHECK(out.at(0, y, x) == doctest::Approx(3.5).epsilon(1e-12));
  }
}

TEST_CASE("single active cell spreads into a symmetric bilinear tent") {
  ConvParams p(1, 1, 8, 8, 4, 0);
  fill_bilinear_kernel(&p);
  FeatureMap in(1, 5, 5);
  in.at(0, 2, 2) = 1.0;
  FeatureMap out = deconv_forward(in, p, 20, 20);
  double cx = 2 * 4 + 3.5 - 2.0;  // kernel center offset minus crop
  (void)cx;
  // Symmetry about the activated cell's footprint.
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 20; ++x) {
      CHECK(out.at(0, y, x) == doctest::Approx(out.at(0, x, y)).epsilon(1e-12));       // transpose symmetry
      CHECK(out.at(0, y, x) == doctest::Approx(out.at(0, 19 - y, x)).epsilon(1e-12));  // vertical mirror
    }
  }
}

TEST_CASE("global average pool unpool") {
  FeatureMap in(1, 2, 2);
  in.v = {1, 2, 3, 4};
  FeatureMap out = global_average_pool_unpool(in);
  for (double v : out.v) CHECK(v == doctest::Approx(2.5).epsilon(1e-15));

  FeatureMap c(2, 3, 3);
  c.fill(0.7);
  FeatureMap oc = global_average_pool_unpool(c);
  for (double v : oc.v) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));

  Rng rng(7);
  FeatureMap r = random_map(3, 4, 4, -1, 1, &rng);
  FeatureMap orr = global_average_pool_unpool(r);
  for (int ch = 0; ch < 3; ++ch) {
    for (int i = 1; i < 16; ++i) CHECK(orr.v[ch * 16 + i] == orr.v[ch * 16]);  // zero spatial variance
  }
}

TEST_CASE("xavier init bound, determinism, and mean") {
  Rng rng(41);
  std::vector<double> v = xavier_init(3, 3, 1000, &rng);
  for (double x : v) {
    CHECK(x <= 1.0);  // bound = sqrt(6/6) = 1
    CHECK(x >= -1.0);
  }
  Rng r1(99), r2(99);
  CHECK(xavier_init(10, 20, 512, &r1) == xavier_init(10, 20, 512, &r2));

  Rng r3(5);
  std::vector<double> big = xavier_init(50, 50, 100000, &r3);
  double mean = 0;
  for (double x : big) mean += x;
  mean /= big.size();
  CHECK(std::abs(mean) < 0.01);
  CHECK_THROWS_AS(xavier_init(0, 3, 4, &r3), std::invalid_argument);
}

TEST_CASE("finite difference oracle basics") {
  Rng rng(1);
  std::vector<double> x = {0.3, -0.7, 1.1};
  auto sum_fn = [](const std::vector<double>& v) {
    double s = 0;
    for (double a : v) s += a;
    return s;
  };
  FiniteDiff fd = finite_diff_grad(sum_fn, x, 1e-5, &rng);
  for (double g : fd.grad) CHECK(std::abs(g - 1.0) < 1e-9);

  auto sq_fn = [](const std::vector<double>& v) { return v[0] * v[0] + v[1] * v[1]; };
  FiniteDiff fd2 = finite_diff_grad(sq_fn, {1.0, 2.0}, 1e-5, &rng);
  CHECK(std::abs(fd2.grad[0] - 2.0) < 1e-8);
  CHECK(std::abs(fd2.grad[1] - 4.0) < 1e-8);

  auto const_fn = [](const std::vector<double>&) { return 4.25; };
  FiniteDiff fd3 = finite_diff_grad(const_fn, x, 1e-5, &rng);
  for (double g : fd3.grad) CHECK(std::abs(g) < 1e-9);

  CHECK_THROWS_AS(finite_diff_grad(sum_fn, x, 0.0, &rng), std::invalid_argument);
}

TEST_CASE("finite difference probes a subset on large tensors") {
  Rng rng(4);
  std::vector<double> big(20000, 0.5);
  auto fn = [](const std::vector<double>& v) { return v[0] + v[19999]; };
  FiniteDiff fd = finite_diff_grad(fn, big, 1e-5, &rng);
  CHECK(fd.probes.size() >= 200);
  CHECK(fd.probes.size() < big.size());
}

TEST_CASE("maxpool2x2 forward/backward routing") {
  FeatureMap in(1, 2, 2);
  in.v = {1, 5, 2, 3};
  std::vector<int> am;
  FeatureMap out = maxpool2x2_forward(in, &am);
  CHECK(out.v[0] == 5);
  FeatureMap g(1, 1, 1);
  g.v = {2.0};
  FeatureMap gin = maxpool2x2_backward(in, g, am);
  CHECK(gin.v == std::vector<double>{0, 2, 0, 0});
}
