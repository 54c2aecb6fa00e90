#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "ion/eval.hpp"
#include "ion/postprocess.hpp"
#include "oracles.hpp"

using namespace ion;

namespace {

Detection det(double score, double x1, double y1, double x2, double y2, int cls = 1, int img = 0) {
  Detection d;
  d.class_id = cls;
  d.score = score;
  d.box = {img, x1, y1, x2, y2};
  return d;
}

std::vector<Detection> random_dets(int n, Rng* rng, int cls = 1, int img = 0) {
  std::vector<Detection> dets;
  for (int i = 0; i < n; ++i) {
    double x1 = rng->uniform(0, 60), y1 = rng->uniform(0, 60);
    dets.push_back(det(rng->uniform01(), x1, y1, x1 + rng->uniform(2, 30), y1 + rng->uniform(2, 30), cls, img));
  }
  return dets;
}

}  // namespace

TEST_CASE("iou examples") {
  RoiBox a{0, 0, 0, 10, 10};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, RoiBox{0, 20, 20, 30, 30}) == 0.0);
  CHECK(iou(a, RoiBox{0, 5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  RoiBox zero{0, 5, 5, 5, 5};
  CHECK(iou(zero, zero) == 0.0);  // empty union
}

TEST_CASE("nms basics") {
  SUBCASE("single detection is kept") {
    NmsResult r = nms({det(0.5, 0, 0, 10, 10)}, 0.5);
    CHECK(r.kept == std::vector<int>{0});
    CHECK(r.suppressed[0].empty());
  }
  SUBCASE("identical boxes: higher score kept, lower suppressed by it") {
    std::vector<Detection> dets = {det(0.9, 0, 0, 10, 10), det(0.7, 0, 0, 10, 10)};
    NmsResult r = nms(dets, 0.5);
    CHECK(r.kept == std::vector<int>{0});
    CHECK(r.suppressed[0] == std::vector<int>{1});
  }
  SUBCASE("score ties break by ascending input index") {
    std::vector<Detection> dets = {det(0.8, 0, 0, 10, 10), det(0.8, 1, 0, 11, 10)};
    NmsResult r = nms(dets, 0.5);
    CHECK(r.kept == std::vector<int>{0});
  }
}

TEST_CASE("nms equals the exhaustive greedy oracle on 1000 random instances") {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Detection> dets = random_dets(1 + rng.uniform_int(20), &rng);
    double thresh = rng.uniform01();
    NmsResult got = nms(dets, thresh);
    std::vector<int> want = ion_test::brute_nms(dets, thresh);
    CHECK(got.kept == want);
  }
}

TEST_CASE("nms invariants: subset, descending scores, no kept pair above threshold") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Detection> dets = random_dets(15, &rng);
    double thresh = rng.uniform(0.1, 0.9);
    NmsResult r = nms(dets, thresh);
    CHECK(r.kept.size() <= dets.size());
    for (size_t i = 1; i < r.kept.size(); ++i) CHECK(dets[r.kept[i - 1]].score >= dets[r.kept[i]].score);
    for (size_t i = 0; i < r.kept.size(); ++i) {
      for (size_t j = i + 1; j < r.kept.size(); ++j) {
        CHECK(iou(dets[r.kept[i]].box, dets[r.kept[j]].box) <= thresh);
      }
    }
    // Every detection is either kept or suppressed exactly once.
    std::set<int> seen(r.kept.begin(), r.kept.end());
    for (const auto& sup : r.suppressed) {
      for (int idx : sup) CHECK(seen.insert(idx).second);
    }
    CHECK(seen.size() == dets.size());
  }
}

TEST_CASE("weighted vote") {
  SUBCASE("no neighbor above threshold leaves the box unchanged (self vote)") {
    std::vector<Detection> pool = {det(0.8, 0, 0, 10, 10), det(0.4, 40, 40, 60, 60)};
    std::vector<Detection> kept = {pool[0]};
    std::vector<Detection> voted = weighted_vote(kept, pool, 0.5);
    CHECK(voted[0].box.x1 == 0.0);
    CHECK(voted[0].box.x2 == 10.0);
  }
  SUBCASE("worked weighted-mean example") {
    // kept (0,0,10,10)@0.8, voter (2,0,12,10)@0.4; iou = 8/12 = 2/3
    std::vector<Detection> pool = {det(0.8, 0, 0, 10, 10), det(0.4, 2, 0, 12, 10)};
    std::vector<Detection> voted = weighted_vote({pool[0]}, pool, 0.5);
    CHECK(voted[0].box.x1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(voted[0].box.x2 == doctest::Approx(32.0 / 3.0).epsilon(1e-12));
    CHECK(voted[0].box.y1 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(voted[0].score == 0.8);  // scores untouched
  }
  SUBCASE("matches the brute-force oracle on random instances") {
    Rng rng(11);
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<Detection> pool = random_dets(1 + rng.uniform_int(15), &rng);
      double vote_iou = rng.uniform01();
      NmsResult nr = nms(pool, 0.4);
      std::vector<Detection> kept;
      for (int idx : nr.kept) kept.push_back(pool[idx]);
      std::vector<Detection> voted = weighted_vote(kept, pool, vote_iou);
      for (size_t i = 0; i < kept.size(); ++i) {
        RoiBox want = ion_test::brute_vote(kept[i], pool, vote_iou);
        CHECK(std::abs(voted[i].box.x1 - want.x1) < 1e-9);
        CHECK(std::abs(voted[i].box.y1 - want.y1) < 1e-9);
        CHECK(std::abs(voted[i].box.x2 - want.x2) < 1e-9);
        CHECK(std::abs(voted[i].box.y2 - want.y2) < 1e-9);
      }
    }
  }
  SUBCASE("voted coordinates stay inside the voters' coordinate hull") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<Detection> pool = random_dets(10, &rng);
      NmsResult nr = nms(pool, 0.5);
      std::vector<Detection> kept;
      for (int idx : nr.kept) kept.push_back(pool[idx]);
      std::vector<Detection> voted = weighted_vote(kept, pool, 0.3);
      for (size_t i = 0; i < kept.size(); ++i) {
        double lo = 1e300, hi = -1e300;
        for (const Detection& d : pool) {
          if (iou(d.box, kept[i].box) < 0.3) continue;
          lo = std::min(lo, d.box.x1);
          hi = std::max(hi, d.box.x1);
        }
        CHECK(voted[i].box.x1 >= lo - 1e-12);
        CHECK(voted[i].box.x1 <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("pipeline respects score threshold and per-image cap") {
  Rng rng(17);
  std::vector<Detection> pool;
  for (int img = 0; img < 3; ++img) {
    for (int cls = 1; cls <= 2; ++cls) {
      std::vector<Detection> d = random_dets(30, &rng, cls, img);
      pool.insert(pool.end(), d.begin(), d.end());
    }
  }
  VotingConfig cfg;
  cfg.nms_iou = 0.9;  // keep nearly everything so the cap binds
  cfg.score_thresh = 0.2;
  cfg.max_per_image = 10;
  std::vector<Detection> out = postprocess_detections(pool, cfg);
  std::map<int, int> per_image;
  for (const Detection& d : out) {
    CHECK(d.score > 0.2);
    per_image[d.box.image_id]++;
  }
  for (auto& [img, count] : per_image) CHECK(count <= 10);
}

TEST_CASE("two-round regression") {
  // Stub model: every box scores {bg, c1} = {0.3, 0.7} and regresses to itself.
  BoxEvalFn identity_eval = [](const std::vector<RoiBox>& boxes, std::vector<std::vector<double>>* scores,
                               std::vector<std::vector<BoxDelta>>* deltas) {
    scores->assign(boxes.size(), {0.3, 0.7});
    deltas->assign(boxes.size(), {BoxDelta{}});
  };
  std::vector<RoiBox> proposals = {{0, 5, 5, 25, 25}, {0, 6, 5, 26, 25}, {0, 40, 40, 55, 60}};
  VotingConfig cfg;
  cfg.nms_iou = 0.5;
  cfg.vote_iou = 0.5;
  cfg.score_thresh = 0.05;
  cfg.max_per_image = 100;

  SUBCASE("rounds=1 equals the plain NMS+vote pipeline") {
    cfg.rounds = 1;
    std::vector<Detection> got = two_round_regression(proposals, identity_eval, cfg, 1, 64, 64);
    std::vector<Detection> pool;
    for (const RoiBox& b : proposals) pool.push_back(det(0.7, b.x1, b.y1, b.x2, b.y2));
    std::vector<Detection> want = postprocess_detections(pool, cfg);
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i].box.x1 - want[i].box.x1) < 1e-12);
  }
  SUBCASE("identity deltas: round 2 duplicates and NMS dedupes to the same set") {
    cfg.rounds = 2;
    std::vector<Detection> two = two_round_regression(proposals, identity_eval, cfg, 1, 64, 64);
    cfg.rounds = 1;
    std::vector<Detection> one = two_round_regression(proposals, identity_eval, cfg, 1, 64, 64);
    REQUIRE(two.size() == one.size());
    for (size_t i = 0; i < two.size(); ++i) {
      CHECK(std::abs(two[i].box.x1 - one[i].box.x1) < 1e-9);
      CHECK(std::abs(two[i].box.y2 - one[i].box.y2) < 1e-9);
    }
  }
  SUBCASE("hand-simulated trace with a shifting regressor") {
    // One proposal; the model always shifts the box +2px in x and rescores.
    BoxEvalFn shift_eval = [](const std::vector<RoiBox>& boxes, std::vector<std::vector<double>>* scores,
                              std::vector<std::vector<BoxDelta>>* deltas) {
      scores->assign(boxes.size(), {0.2, 0.8});
      BoxDelta d;
      d.dx = 0.1;  // +2px for a 20px box
      deltas->assign(boxes.size(), {d});
    };
    std::vector<RoiBox> one_prop = {{0, 10, 10, 30, 30}};
    cfg.rounds = 2;
    cfg.nms_iou = 0.95;  // keep both rounds' boxes distinct
    cfg.use_vote = false;
    std::vector<Detection> got = two_round_regression(one_prop, shift_eval, cfg, 1, 64, 64);
    // Round 1: box shifted to x=[12,32]; round 2 re-evaluates that box -> [14,34].
    REQUIRE(got.size() == 2);
    std::vector<double> x1s = {got[0].box.x1, got[1].box.x1};
    std::sort(x1s.begin(), x1s.end());
    CHECK(x1s[0] == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(x1s[1] == doctest::Approx(14.0).epsilon(1e-12));
  }
}

TEST_CASE("flip merge") {
  RoiOutputs a, b;
  a.scores = {{0.4, 0.6}};
  a.deltas = {{BoxDelta{0.2, 0.1, -0.05, 0.3}}};

  SUBCASE("symmetric outputs merge to the original") {
    b = a;
    b.deltas[0][0].dx = -a.deltas[0][0].dx;  // mirrored model sees the mirrored shift
    RoiOutputs m = flip_merge(a, b, 64);
    CHECK(m.scores[0][1] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(m.deltas[0][0].dx == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(m.deltas[0][0].dy == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(m.deltas[0][0].dw == doctest::Approx(-0.05).epsilon(1e-12));
    CHECK(m.deltas[0][0].dh == doctest::Approx(0.3).epsilon(1e-12));
  }
  SUBCASE("scores 0.6 and 0.8 average to 0.7") {
    b = a;
    b.scores = {{0.2, 0.8}};
    RoiOutputs m = flip_merge(a, b, 64);
    CHECK(m.scores[0][1] == doctest::Approx(0.7).epsilon(1e-12));
  }
  SUBCASE("equal flipped dx cancels to zero") {
    b = a;
    b.deltas[0][0].dx = 0.2;
    RoiOutputs m = flip_merge(a, b, 64);
    CHECK(m.deltas[0][0].dx == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("mismatched ROI sets are rejected") {
    b = a;
    b.scores.push_back({0.5, 0.5});
    b.deltas.push_back({BoxDelta{}});
    CHECK_THROWS_AS(flip_merge(a, b, 64), std::invalid_argument);
  }
}

TEST_CASE("threshold search") {
  // Ground truth and jittered detections where only tight voting preserves
  // localization at IoU 0.85.
  Rng rng(23);
  std::vector<GroundTruthObject> gts;
  std::vector<Detection> pool;
  for (int i = 0; i < 25; ++i) {
    GroundTruthObject g;
    g.class_id = 1;
    double x = rng.uniform(0, 200), y = rng.uniform(0, 200);
    g.box = {i, x, y, x + 20, y + 20};
    gts.push_back(g);
    // The best-scored detection is noticeably offset; many mildly jittered
    // mid-score detections cluster tightly on the truth. Loose voting drags
    // boxes toward the offset one, tight voting keeps the cluster.
    pool.push_back(det(0.9, x + 3.0, y, x + 23.0, y + 20, 1, i));
    for (int j = 0; j < 8; ++j) {
      double ox = rng.uniform(-0.4, 0.4), oy = rng.uniform(-0.4, 0.4);
      pool.push_back(det(rng.uniform(0.5, 0.7), x + ox, y + oy, x + 20 + ox, y + 20 + oy, 1, i));
    }
  }
  VotingConfig base;
  base.score_thresh = 0.05;
  base.max_per_image = 100;

  SUBCASE("single candidate pair is returned") {
    Rng r1(5);
    ThresholdSearchResult one = threshold_search(pool, gts, 1, 1, base, &r1);
    Rng r2(5);
    double nms_iou = r2.uniform01(), vote_iou = r2.uniform01();
    CHECK(one.nms_iou == nms_iou);
    CHECK(one.vote_iou == vote_iou);
  }
  SUBCASE("deterministic under a fixed seed") {
    Rng r1(9), r2(9);
    ThresholdSearchResult a = threshold_search(pool, gts, 1, 50, base, &r1);
    ThresholdSearchResult b = threshold_search(pool, gts, 1, 50, base, &r2);
    CHECK(a.nms_iou == b.nms_iou);
    CHECK(a.vote_iou == b.vote_iou);
    CHECK(a.map == b.map);
  }
  SUBCASE("search prefers tight voting when loose voting provably hurts") {
    Rng r(31);
    ThresholdSearchResult best = threshold_search(pool, gts, 1, 300, base, &r);
    CHECK(best.vote_iou > 0.7);
  }
  SUBCASE("empty validation set is rejected") {
    Rng r(1);
    CHECK_THROWS_AS(threshold_search(pool, {}, 1, 10, base, &r), std::invalid_argument);
  }
}

TEST_CASE("anchor shape generation") {
  AnchorConfig cfg;
  std::vector<std::pair<double, double>> shapes = generate_anchor_shapes(cfg);
  CHECK(shapes.size() == 22);
  CHECK(shapes[0].first == 32.0);
  CHECK(shapes[0].second == 32.0);

  // ratio 1:1 at scale 128 -> exactly 128x128
  bool found_128 = false;
  for (auto& [w, h] : shapes) {
    if (std::abs(w - 128.0) < 1e-9 && std::abs(h - 128.0) < 1e-9) found_128 = true;
  }
  CHECK(found_128);

  // ratio 2:1 at scale 64 -> (64*sqrt2, 64/sqrt2)
  bool found_2to1 = false;
  for (auto& [w, h] : shapes) {
    if (std::abs(w - 64.0 * std::sqrt(2.0)) < 1e-9 && std::abs(h - 64.0 / std::sqrt(2.0)) < 1e-9) found_2to1 = true;
  }
  CHECK(found_2to1);

  // every grid shape preserves the area of its scale
  for (size_t i = 1; i < shapes.size(); ++i) {
    double area = shapes[i].first * shapes[i].second;
    double scale = cfg.scales[(i - 1) % cfg.scales.size()];
    CHECK(area == doctest::Approx(scale * scale).epsilon(1e-9));
  }
}

TEST_CASE("directional voting property on jittered detections") {
  // Gaussian localization jitter around each ground truth; voting at 0.5
  // should help AP@0.5 and hurt AP@0.85, voting at 0.854 should not hurt
  // AP@0.85.
  Rng rng(2026);
  std::vector<GroundTruthObject> gts;
  std::vector<Detection> pool;
  const int n_gt = 120;
  for (int i = 0; i < n_gt; ++i) {
    int img = i;
    double x = rng.uniform(0, 300), y = rng.uniform(0, 300), s = rng.uniform(18, 36);
    GroundTruthObject g;
    g.class_id = 1;
    g.box = {img, x, y, x + s, y + s};
    gts.push_back(g);
    int votes = 7 + rng.uniform_int(6);
    for (int j = 0; j < votes; ++j) {
      double jit = 0.11 * s;
      double ox1 = rng.gaussian(0, jit), oy1 = rng.gaussian(0, jit);
      double ox2 = rng.gaussian(0, jit), oy2 = rng.gaussian(0, jit);
      double score = std::clamp(rng.uniform(0.3, 0.95), 0.0, 1.0);
      pool.push_back(det(score, x + ox1, y + oy1, x + s + ox2, y + s + oy2, 1, img));
    }
  }
  auto ap_at = [&](const std::vector<Detection>& dets, double thresh) {
    MatchResult m = match_detections(dets, gts, thresh);
    return average_precision(m.flags, m.num_gt);
  };
  VotingConfig no_vote;
  no_vote.nms_iou = 0.4;
  no_vote.use_vote = false;
  no_vote.score_thresh = 0.05;
  no_vote.max_per_image = 100;
  VotingConfig vote_05 = no_vote;
  vote_05.use_vote = true;
  vote_05.vote_iou = 0.5;
  VotingConfig vote_854 = no_vote;
  vote_854.use_vote = true;
  vote_854.vote_iou = 0.854;

  std::vector<Detection> base = postprocess_detections(pool, no_vote);
  std::vector<Detection> v05 = postprocess_detections(pool, vote_05);
  std::vector<Detection> v854 = postprocess_detections(pool, vote_854);

  CHECK(ap_at(v05, 0.5) > ap_at(base, 0.5));
  CHECK(ap_at(v05, 0.85) < ap_at(base, 0.85));
  CHECK(ap_at(v854, 0.85) >= ap_at(base, 0.85) - 0.005);
}
