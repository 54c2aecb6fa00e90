#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "ion/gradcheck.hpp"
#include "ion/ops.hpp"
#include "ion/skip_pool.hpp"
#include "oracles.hpp"

using namespace ion;
using ion_test::random_map;

TEST_CASE("roi pooling a 7x7 cell region at stride 1 is the identity") {
  Rng rng(2);
  FeatureMap f = random_map(2, 12, 12, -1, 1, &rng);
  RoiBox roi{0, 3.0, 2.0, 10.0, 9.0};  // covers cells [3,10) x [2,9)
  RoiPoolResult r = roi_max_pool(f, roi, 1, 7, 7);
  for (int c = 0; c < 2; ++c) {
    for (int y = 0; y < 7; ++y) {
      for (int x = 0; x < 7; ++x) CHECK(r.pooled.at(c, y, x) == f.at(c, 2 + y, 3 + x));
    }
  }
}

TEST_CASE("roi pooling a constant map is constant") {
  FeatureMap f(3, 8, 8);
  f.fill(0.4);
  RoiPoolResult r = roi_max_pool(f, RoiBox{0, 5.0, 7.0, 90.0, 60.0}, 8, 7, 7);
  for (double v : r.pooled.v) CHECK(v == 0.4);
}

TEST_CASE("roi pooling matches the brute-force bin-max oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    FeatureMap f = random_map(1 + rng.uniform_int(3), 13, 9, -1, 1, &rng);
    int stride = 1 << rng.uniform_int(3);
    RoiBox roi;
    roi.x1 = rng.uniform(0, f.width * stride * 0.7);
    roi.y1 = rng.uniform(0, f.height * stride * 0.7);
    roi.x2 = roi.x1 + rng.uniform(1.0, f.width * stride * 0.6);
    roi.y2 = roi.y1 + rng.uniform(1.0, f.height * stride * 0.6);
    RoiPoolResult got = roi_max_pool(f, roi, stride, 7, 7);
    FeatureMap want = ion_test::brute_roi_pool(f, roi, stride, 7, 7);
    CHECK(got.pooled.v == want.v);
  }
}

TEST_CASE("degenerate ROI is treated as a 1x1 cell region") {
  Rng rng(5);
  FeatureMap f = random_map(1, 6, 6, -1, 1, &rng);
  RoiBox point{0, 8.0, 8.0, 8.0, 8.0};
  RoiPoolResult r = roi_max_pool(f, point, 4, 3, 3);
  for (double v : r.pooled.v) CHECK(v == f.at(0, 2, 2));
}

TEST_CASE("roi pool backward routes every gradient to its argmax and conserves mass") {
  Rng rng(7);
  FeatureMap f = random_map(2, 10, 10, -1, 1, &rng);
  RoiBox roi{0, 2.0, 3.0, 33.0, 29.0};
  RoiPoolResult r = roi_max_pool(f, roi, 4, 7, 7);
  FeatureMap g = random_map(2, 7, 7, -1, 1, &rng);
  FeatureMap gin(2, 10, 10);
  roi_max_pool_backward(r, g, &gin);
  double in_mass = 0, out_mass = 0;
  for (double v : g.v) in_mass += v;
  for (double v : gin.v) out_mass += v;
  CHECK(out_mass == doctest::Approx(in_mass).epsilon(1e-12));
}

TEST_CASE("argmax ties break toward the smallest linear index") {
  FeatureMap f(1, 4, 4);
  f.fill(1.0);
  RoiPoolResult r = roi_max_pool(f, RoiBox{0, 0.0, 0.0, 4.0, 4.0}, 1, 1, 1);
  CHECK(r.argmax[0] == 0);
}

TEST_CASE("l2 normalization examples") {
  SUBCASE("unit blob unchanged") {
    FeatureMap d(1, 1, 2);
    d.v = {0.6, 0.8};
    FeatureMap n = l2_normalize(d, NormMode::kSumOverAllEntries);
    CHECK(n.v[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(n.v[1] == doctest::Approx(0.8).epsilon(1e-12));
  }
  SUBCASE("all-zero blob stays zero, no NaN") {
    FeatureMap d(2, 3, 3);
    FeatureMap n = l2_normalize(d, NormMode::kSumOverAllEntries);
    for (double v : n.v) CHECK(v == 0.0);
    FeatureMap n2 = l2_normalize(d, NormMode::kSumAcrossChannels);
    for (double v : n2.v) CHECK(v == 0.0);
  }
  SUBCASE("blob [3,4] normalizes to [0.6, 0.8]") {
    FeatureMap d(1, 1, 2);
    d.v = {3.0, 4.0};
    FeatureMap n = l2_normalize(d, NormMode::kSumOverAllEntries);
    CHECK(n.v[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(n.v[1] == doctest::Approx(0.8).epsilon(1e-12));
  }
}

TEST_CASE("normalized output has unit norm in both modes") {
  Rng rng(11);
  FeatureMap d = random_map(4, 3, 3, -2, 2, &rng);
  FeatureMap blob = l2_normalize(d, NormMode::kSumOverAllEntries);
  double ss = 0;
  for (double v : blob.v) ss += v * v;
  CHECK(std::sqrt(ss) == doctest::Approx(1.0).epsilon(1e-12));

  FeatureMap loc = l2_normalize(d, NormMode::kSumAcrossChannels);
  for (int i = 0; i < 9; ++i) {
    double s = 0;
    for (int c = 0; c < 4; ++c) s += loc.v[c * 9 + i] * loc.v[c * 9 + i];
    CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("rescale: identity at 1, mode defaults are 1000 and 130") {
  Rng rng(13);
  FeatureMap d = random_map(3, 2, 2, -1, 1, &rng);
  FeatureMap same = rescale(d, {1.0});
  CHECK(same.v == d.v);
  CHECK(default_scale_init(NormMode::kSumOverAllEntries) == 1000.0);
  CHECK(default_scale_init(NormMode::kSumAcrossChannels) == 130.0);
}

TEST_CASE("fuse: single source with identity reduce returns the scaled input") {
  Rng rng(17);
  FeatureMap f = random_map(3, 8, 8, -1, 1, &rng);
  SkipPoolConfig cfg;
  cfg.sources = {{"conv5", 4}};
  cfg.pooled_h = cfg.pooled_w = 3;
  cfg.norm_mode = NormMode::kSumOverAllEntries;
  cfg.scale_mode = ScaleMode::kFixed;
  cfg.scale_init = 2.0;
  cfg.reduced_channels = 3;
  SkipPoolParams params = make_skip_pool(cfg, {3}, &rng);
  // identity 1x1 reduce
  std::fill(params.reduce.weights.begin(), params.reduce.weights.end(), 0.0);
  for (int c = 0; c < 3; ++c) params.reduce.w(c, c, 0, 0) = 1.0;
  std::fill(params.reduce.bias.begin(), params.reduce.bias.end(), 0.0);

  RoiBox roi{0, 0.0, 0.0, 32.0, 32.0};
  FuseCache cache;
  FeatureMap out = fuse_descriptors({&f}, roi, params, &cache);
  RoiPoolResult pr = roi_max_pool(f, roi, 4, 3, 3);
  FeatureMap want = rescale(l2_normalize(pr.pooled, cfg.norm_mode), {2.0});
  for (size_t i = 0; i < out.v.size(); ++i) CHECK(out.v[i] == doctest::Approx(want.v[i]).epsilon(1e-12));
}

TEST_CASE("fuse: channel concat happens in declared source order") {
  Rng rng(19);
  FeatureMap a = random_map(2, 4, 4, 5, 6, &rng);   // distinct ranges to identify sources
  FeatureMap b = random_map(3, 8, 8, -6, -5, &rng);
  SkipPoolConfig cfg;
  cfg.sources = {{"x", 1}, {"y", 2}};
  cfg.pooled_h = cfg.pooled_w = 2;
  cfg.norm_mode = NormMode::kNone;
  cfg.reduced_channels = 4;
  SkipPoolParams params = make_skip_pool(cfg, {2, 3}, &rng);
  CHECK(params.reduce.in_channels == 5);

  RoiBox roi{0, 0.0, 0.0, 4.0, 4.0};
  FuseCache cache;
  fuse_descriptors({&a, &b}, roi, params, &cache);
  CHECK(cache.concat.channels == 5);
  for (int i = 0; i < 4; ++i) {
    CHECK(cache.concat.v[i] >= 5.0);        // first two channels from source a
    CHECK(cache.concat.v[4 * 4 + i] <= -5.0);  // later channels from source b
  }
}

TEST_CASE("fuse output shape is reduced_channels x pooled dims regardless of source count") {
  Rng rng(23);
  FeatureMap a = random_map(2, 8, 8, -1, 1, &rng);
  FeatureMap b = random_map(4, 4, 4, -1, 1, &rng);
  FeatureMap c = random_map(3, 4, 4, -1, 1, &rng);
  for (int n_src = 1; n_src <= 3; ++n_src) {
    SkipPoolConfig cfg;
    std::vector<const FeatureMap*> maps;
    std::vector<int> ch;
    const FeatureMap* all[3] = {&a, &b, &c};
    int strides[3] = {2, 4, 4};
    for (int s = 0; s < n_src; ++s) {
      cfg.sources.push_back({"s" + std::to_string(s), strides[s]});
      maps.push_back(all[s]);
      ch.push_back(all[s]->channels);
    }
    cfg.pooled_h = cfg.pooled_w = 7;
    cfg.reduced_channels = 5;
    SkipPoolParams params = make_skip_pool(cfg, ch, &rng);
    FeatureMap out = fuse_descriptors(maps, RoiBox{0, 1.0, 1.0, 14.0, 13.0}, params, nullptr);
    CHECK(out.channels == 5);
    CHECK(out.height == 7);
    CHECK(out.width == 7);
  }
}

TEST_CASE("norm_mode none reduces the pipeline to plain concat + 1x1") {
  Rng rng(29);
  FeatureMap a = random_map(2, 6, 6, -1, 1, &rng);
  SkipPoolConfig cfg;
  cfg.sources = {{"a", 2}};
  cfg.pooled_h = cfg.pooled_w = 3;
  cfg.norm_mode = NormMode::kNone;
  cfg.reduced_channels = 2;
  SkipPoolParams params = make_skip_pool(cfg, {2}, &rng);
  RoiBox roi{0, 0.0, 0.0, 12.0, 12.0};
  FeatureMap out = fuse_descriptors({&a}, roi, params, nullptr);
  FeatureMap want = conv2d_forward(roi_max_pool(a, roi, 2, 3, 3).pooled, params.reduce);
  CHECK(out.v == want.v);
}

TEST_CASE("full pool->norm->scale->concat->reduce chain passes a gradient check") {
  Rng rng(31);
  FeatureMap a = random_map(2, 6, 6, -1, 1, &rng);
  FeatureMap b = random_map(2, 3, 3, -1, 1, &rng);
  SkipPoolConfig cfg;
  cfg.sources = {{"a", 2}, {"b", 4}};
  cfg.pooled_h = cfg.pooled_w = 2;
  cfg.norm_mode = NormMode::kSumOverAllEntries;
  cfg.scale_mode = ScaleMode::kLearnedPerChannel;
  cfg.scale_init = 3.0;
  cfg.reduced_channels = 2;
  SkipPoolParams params = make_skip_pool(cfg, {2, 2}, &rng);
  RoiBox roi{0, 1.0, 1.0, 11.0, 10.0};
  std::vector<double> proj(2 * 2 * 2);
  for (double& x : proj) x = rng.uniform(-1, 1);

  // Point = [map a | map b | scales a | scales b | reduce w | reduce b]
  std::vector<double> point = a.v;
  point.insert(point.end(), b.v.begin(), b.v.end());
  point.insert(point.end(), params.scales[0].begin(), params.scales[0].end());
  point.insert(point.end(), params.scales[1].begin(), params.scales[1].end());
  point.insert(point.end(), params.reduce.weights.begin(), params.reduce.weights.end());
  point.insert(point.end(), params.reduce.bias.begin(), params.reduce.bias.end());

  auto rebuild = [&](const std::vector<double>& x, FeatureMap* fa, FeatureMap* fb, SkipPoolParams* p) {
    *fa = a;
    *fb = b;
    *p = params;
    size_t i = 0;
    std::copy(x.begin(), x.begin() + fa->v.size(), fa->v.begin());
    i += fa->v.size();
    std::copy(x.begin() + i, x.begin() + i + fb->v.size(), fb->v.begin());
    i += fb->v.size();
    std::copy(x.begin() + i, x.begin() + i + 2, p->scales[0].begin());
    i += 2;
    std::copy(x.begin() + i, x.begin() + i + 2, p->scales[1].begin());
    i += 2;
    std::copy(x.begin() + i, x.begin() + i + p->reduce.weights.size(), p->reduce.weights.begin());
    i += p->reduce.weights.size();
    std::copy(x.begin() + i, x.end(), p->reduce.bias.begin());
  };
  auto fn = [&](const std::vector<double>& x) {
    FeatureMap fa, fb;
    SkipPoolParams p;
    rebuild(x, &fa, &fb, &p);
    FeatureMap out = fuse_descriptors({&fa, &fb}, roi, p, nullptr);
    double s = 0;
    for (size_t i = 0; i < out.v.size(); ++i) s += out.v[i] * proj[i];
    return s;
  };

  FuseCache cache;
  fuse_descriptors({&a, &b}, roi, params, &cache);
  FeatureMap gd(2, 2, 2);
  gd.v = proj;
  FeatureMap ga(2, 6, 6), gb(2, 3, 3);
  FuseGrads fg;
  fuse_descriptors_backward(params, cache, gd, {&ga, &gb}, &fg);

  std::vector<double> analytic = ga.v;
  analytic.insert(analytic.end(), gb.v.begin(), gb.v.end());
  analytic.insert(analytic.end(), fg.scales[0].begin(), fg.scales[0].end());
  analytic.insert(analytic.end(), fg.scales[1].begin(), fg.scales[1].end());
  analytic.insert(analytic.end(), fg.reduce.weights.begin(), fg.reduce.weights.end());
  analytic.insert(analytic.end(), fg.reduce.bias.begin(), fg.reduce.bias.end());

  GradCheckReport rep = grad_check("fuse_chain", fn, point, analytic, 1e-6, &rng);
  CHECK(rep.max_rel_error <= 1e-5);
}

TEST_CASE("measure_mean_descriptor_norm") {
  SUBCASE("unit-norm descriptors average to 1") {
    FeatureMap f(1, 2, 2);
    f.fill(0.0);
    f.at(0, 0, 0) = 1.0;  // every pooled 1x1 blob from the top-left has norm 1
    std::vector<RoiBox> rois = {{0, 0.0, 0.0, 1.0, 1.0}, {0, 0.0, 0.0, 0.9, 0.9}};
    double m = measure_mean_descriptor_norm({&f}, rois, 1, 1, 1, NormMode::kSumOverAllEntries);
    CHECK(m == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("norms 2 and 4 average to 3") {
    FeatureMap f(1, 2, 1);
    f.at(0, 0, 0) = 2.0;
    f.at(0, 1, 0) = 4.0;
    std::vector<RoiBox> rois = {{0, 0.0, 0.0, 1.0, 1.0}, {0, 0.0, 1.0, 1.0, 2.0}};
    double m = measure_mean_descriptor_norm({&f}, rois, 1, 1, 1, NormMode::kSumOverAllEntries);
    CHECK(m == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("empty sample is rejected") {
    FeatureMap f(1, 2, 2);
    CHECK_THROWS_AS(measure_mean_descriptor_norm({&f}, {}, 1, 1, 1, NormMode::kSumOverAllEntries),
                    std::invalid_argument);
  }
  SUBCASE("deterministic given the same sample") {
    Rng rng(37);
    FeatureMap f = random_map(2, 6, 6, -1, 1, &rng);
    std::vector<RoiBox> rois = {{0, 0.0, 0.0, 10.0, 10.0}, {0, 4.0, 2.0, 20.0, 18.0}};
    double m1 = measure_mean_descriptor_norm({&f}, rois, 4, 3, 3, NormMode::kSumAcrossChannels);
    double m2 = measure_mean_descriptor_norm({&f}, rois, 4, 3, 3, NormMode::kSumAcrossChannels);
    CHECK(m1 == m2);
  }
}
