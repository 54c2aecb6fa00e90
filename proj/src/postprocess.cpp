#include "ion/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ion/eval.hpp"

namespace ion {

namespace {

std::vector<int> score_order(const std::vector<Detection>& dets) {
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return a < b;
  });
  return order;
}

}  // namespace

NmsResult nms(const std::vector<Detection>& dets, double iou_thresh) {
  NmsResult r;
  std::vector<int> order = score_order(dets);
  std::vector<uint8_t> removed(dets.size(), 0);
  for (size_t oi = 0; oi < order.size(); ++oi) {
    int i = order[oi];
    if (removed[i]) continue;
    r.kept.push_back(i);
    r.suppressed.emplace_back();
    for (size_t oj = oi + 1; oj < order.size(); ++oj) {
      int j = order[oj];
      if (removed[j]) continue;
      if (iou(dets[i].box, dets[j].box) > iou_thresh) {
        removed[j] = 1;
        r.suppressed.back().push_back(j);
      }
    }
  }
  return r;
}

std::vector<Detection> weighted_vote(const std::vector<Detection>& kept, const std::vector<Detection>& pool,
                                     double vote_iou) {
  std::vector<Detection> out = kept;
  for (Detection& k : out) {
    double wsum = 0.0, x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
    for (const Detection& d : pool) {
      if (d.class_id != k.class_id || d.box.image_id != k.box.image_id) continue;
      if (iou(d.box, k.box) < vote_iou) continue;
      wsum += d.score;
      x1 += d.score * d.box.x1;
      y1 += d.score * d.box.y1;
      x2 += d.score * d.box.x2;
      y2 += d.score * d.box.y2;
    }
    if (wsum > 0.0) {
      k.box.x1 = x1 / wsum;
      k.box.y1 = y1 / wsum;
      k.box.x2 = x2 / wsum;
      k.box.y2 = y2 / wsum;
    }
  }
  return out;
}

std::vector<Detection> postprocess_detections(const std::vector<Detection>& pool, const VotingConfig& config) {
  // Group by (image, class); groups stay in first-appearance order so the
  // result is independent of container hashing.
  std::map<std::pair<int, int>, std::vector<Detection>> groups;
  for (const Detection& d : pool) {
    if (d.score <= config.score_thresh) continue;
    groups[{d.box.image_id, d.class_id}].push_back(d);
  }

  std::map<int, std::vector<Detection>> per_image;
  for (auto& [key, dets] : groups) {
    NmsResult r = nms(dets, config.nms_iou);
    std::vector<Detection> kept;
    kept.reserve(r.kept.size());
    for (int idx : r.kept) kept.push_back(dets[idx]);
    if (config.use_vote) kept = weighted_vote(kept, dets, config.vote_iou);
    auto& img_list = per_image[key.first];
    img_list.insert(img_list.end(), kept.begin(), kept.end());
  }

  std::vector<Detection> out;
  for (auto& [image_id, dets] : per_image) {
    // Per-image cap applies across classes by global score sort.
    std::vector<int> order = score_order(dets);
    int limit = std::min<int>(config.max_per_image, static_cast<int>(order.size()));
    for (int i = 0; i < limit; ++i) out.push_back(dets[order[i]]);
  }
  return out;
}

namespace {

std::vector<Detection> eval_round(const std::vector<RoiBox>& boxes, const BoxEvalFn& eval_fn,
                                  const VotingConfig& config, int num_classes, double img_w, double img_h) {
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<BoxDelta>> deltas;
  eval_fn(boxes, &scores, &deltas);
  check(scores.size() == boxes.size() && deltas.size() == boxes.size(),
        "two_round_regression: eval_fn output count mismatch");
  std::vector<Detection> dets;
  for (size_t i = 0; i < boxes.size(); ++i) {
    check(scores[i].size() == static_cast<size_t>(num_classes) + 1 && deltas[i].size() == static_cast<size_t>(num_classes),
          "two_round_regression: per-box output size mismatch");
    for (int c = 1; c <= num_classes; ++c) {
      double s = scores[i][c];
      if (s <= config.score_thresh) continue;
      Detection d;
      d.class_id = c;
      d.score = s;
      d.box = decode_delta(boxes[i], deltas[i][c - 1], img_w, img_h);
      dets.push_back(d);
    }
  }
  return dets;
}

}  // namespace

std::vector<Detection> two_round_pool(const std::vector<RoiBox>& proposals, const BoxEvalFn& eval_fn,
                                      const VotingConfig& config, int num_classes, double img_w, double img_h) {
  check(config.rounds == 1 || config.rounds == 2, "two_round_pool: rounds must be 1 or 2");
  std::vector<Detection> pool = eval_round(proposals, eval_fn, config, num_classes, img_w, img_h);
  if (config.rounds == 2) {
    std::vector<RoiBox> round2;
    round2.reserve(pool.size());
    for (const Detection& d : pool) {
      if (d.box.width() > 1e-6 && d.box.height() > 1e-6) round2.push_back(d.box);
    }
    std::vector<Detection> second = eval_round(round2, eval_fn, config, num_classes, img_w, img_h);
    pool.insert(pool.end(), second.begin(), second.end());
  }
  return pool;
}

std::vector<Detection> two_round_regression(const std::vector<RoiBox>& proposals, const BoxEvalFn& eval_fn,
                                            const VotingConfig& config, int num_classes, double img_w, double img_h) {
  return postprocess_detections(two_round_pool(proposals, eval_fn, config, num_classes, img_w, img_h), config);
}

RoiOutputs flip_merge(const RoiOutputs& original, const RoiOutputs& flipped, double image_width) {
  (void)image_width;  // mirroring happens in delta space; no absolute coords involved
  check(original.scores.size() == flipped.scores.size() && original.deltas.size() == flipped.deltas.size(),
        "flip_merge: ROI set mismatch");
  RoiOutputs merged;
  merged.scores.resize(original.scores.size());
  merged.deltas.resize(original.deltas.size());
  for (size_t i = 0; i < original.scores.size(); ++i) {
    check(original.scores[i].size() == flipped.scores[i].size(), "flip_merge: score length mismatch");
    merged.scores[i].resize(original.scores[i].size());
    for (size_t c = 0; c < original.scores[i].size(); ++c) {
      merged.scores[i][c] = 0.5 * (original.scores[i][c] + flipped.scores[i][c]);
    }
    check(original.deltas[i].size() == flipped.deltas[i].size(), "flip_merge: delta length mismatch");
    merged.deltas[i].resize(original.deltas[i].size());
    for (size_t c = 0; c < original.deltas[i].size(); ++c) {
      const BoxDelta& a = original.deltas[i][c];
      const BoxDelta& b = flipped.deltas[i][c];
      BoxDelta m;
      m.dx = 0.5 * (a.dx + (-b.dx));  // flip back: x offset mirrors
      m.dy = 0.5 * (a.dy + b.dy);
      m.dw = 0.5 * (a.dw + b.dw);
      m.dh = 0.5 * (a.dh + b.dh);
      merged.deltas[i][c] = m;
    }
  }
  return merged;
}

ThresholdSearchResult threshold_search(const std::vector<Detection>& pooled_dets,
                                       const std::vector<GroundTruthObject>& gts, int num_classes, int num_samples,
                                       const VotingConfig& base_config, Rng* rng) {
  check(!gts.empty(), "threshold_search: empty validation set");
  check(num_samples >= 1, "threshold_search: need at least one sample");
  ThresholdSearchResult best;
  best.map = -1.0;
  for (int s = 0; s < num_samples; ++s) {
    VotingConfig cfg = base_config;
    cfg.nms_iou = rng->uniform01();
    cfg.vote_iou = rng->uniform01();
    cfg.use_vote = true;
    std::vector<Detection> final_dets = postprocess_detections(pooled_dets, cfg);
    EvalResult ev = coco_map(final_dets, gts, num_classes);
    if (ev.map_coco > best.map) {
      best.map = ev.map_coco;
      best.nms_iou = cfg.nms_iou;
      best.vote_iou = cfg.vote_iou;
    }
  }
  return best;
}

std::vector<std::pair<double, double>> generate_anchor_shapes(const AnchorConfig& config) {
  std::vector<std::pair<double, double>> shapes;
  shapes.emplace_back(config.base_w, config.base_h);
  for (double r : config.aspect_ratios) {
    for (double s : config.scales) {
      shapes.emplace_back(s * std::sqrt(r), s / std::sqrt(r));
    }
  }
  return shapes;
}

}  // namespace ion
