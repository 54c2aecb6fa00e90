#include "ion/eval.hpp"

#include <algorithm>
#include <numeric>

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

std::vector<Detection> filter_class(const std::vector<Detection>& dets, int class_id) {
  std::vector<Detection> out;
  for (const Detection& d : dets) {
    if (d.class_id == class_id) out.push_back(d);
  }
  return out;
}

std::vector<GroundTruthObject> filter_class(const std::vector<GroundTruthObject>& gts, int class_id) {
  std::vector<GroundTruthObject> out;
  for (const GroundTruthObject& g : gts) {
    if (g.class_id == class_id) out.push_back(g);
  }
  return out;
}

int count_matchable(const std::vector<GroundTruthObject>& gts) {
  int n = 0;
  for (const GroundTruthObject& g : gts) {
    if (!g.difficult) ++n;
  }
  return n;
}

// Marks ground truths outside the [lo, hi] area bucket as difficult so they
// are ignored rather than counted as misses.
std::vector<GroundTruthObject> bucketize(const std::vector<GroundTruthObject>& gts, double area_lo, double area_hi) {
  std::vector<GroundTruthObject> out = gts;
  for (GroundTruthObject& g : out) {
    double a = g.box.area();
    if (a <= area_lo || a > area_hi) g.difficult = true;
  }
  return out;
}

}  // namespace

MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<GroundTruthObject>& gts,
                             double iou_thresh) {
  MatchResult r;
  r.order = score_order(dets);
  r.flags.assign(dets.size(), DetMatch::kFalsePositive);
  r.num_gt = count_matchable(gts);

  std::vector<uint8_t> consumed(gts.size(), 0);
  for (size_t oi = 0; oi < r.order.size(); ++oi) {
    const Detection& d = dets[r.order[oi]];
    int best_gt = -1;
    double best_iou = 0.0;
    bool difficult_overlap = false;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].class_id != d.class_id || gts[g].box.image_id != d.box.image_id) continue;
      double ov = iou(d.box, gts[g].box);
      if (ov < iou_thresh || ov <= 0.0) continue;
      if (gts[g].difficult) {
        difficult_overlap = true;
        continue;
      }
      if (consumed[g]) continue;
      if (ov > best_iou || best_gt < 0) {
        best_iou = ov;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0) {
      consumed[best_gt] = 1;
      r.flags[oi] = DetMatch::kTruePositive;
    } else if (difficult_overlap) {
      r.flags[oi] = DetMatch::kIgnored;
    }
  }
  return r;
}

double average_precision(const std::vector<DetMatch>& flags, int num_gt) {
  if (num_gt <= 0) return 0.0;
  std::vector<double> recall, precision;
  int tp = 0, fp = 0;
  for (DetMatch f : flags) {
    if (f == DetMatch::kIgnored) continue;
    if (f == DetMatch::kTruePositive) {
      ++tp;
    } else {
      ++fp;
    }
    recall.push_back(static_cast<double>(tp) / num_gt);
    precision.push_back(static_cast<double>(tp) / (tp + fp));
  }
  if (recall.empty()) return 0.0;
  // Right-to-left precision envelope, then integrate over recall increments.
  for (int i = static_cast<int>(precision.size()) - 2; i >= 0; --i) {
    precision[i] = std::max(precision[i], precision[i + 1]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

EvalResult coco_map(const std::vector<Detection>& dets, const std::vector<GroundTruthObject>& gts, int num_classes) {
  EvalResult r;
  r.iou_thresholds = coco_iou_thresholds();
  const int nt = static_cast<int>(r.iou_thresholds.size());
  std::vector<double> map_per_t(nt, 0.0);
  int counted_classes = 0;

  for (int c = 1; c <= num_classes; ++c) {
    std::vector<Detection> dc = filter_class(dets, c);
    std::vector<GroundTruthObject> gc = filter_class(gts, c);
    if (count_matchable(gc) == 0) continue;
    ++counted_classes;
    std::vector<double>& ap_row = r.per_class_ap[c];
    for (int t = 0; t < nt; ++t) {
      MatchResult m = match_detections(dc, gc, r.iou_thresholds[t]);
      double ap = average_precision(m.flags, m.num_gt);
      ap_row.push_back(ap);
      map_per_t[t] += ap;
    }
  }
  if (counted_classes > 0) {
    for (double& v : map_per_t) v /= counted_classes;
    r.map50 = map_per_t[0];
    r.map_coco = std::accumulate(map_per_t.begin(), map_per_t.end(), 0.0) / nt;
  }
  return r;
}

double average_recall(const std::vector<Detection>& dets, const std::vector<GroundTruthObject>& gts, int num_classes,
                      int max_dets) {
  // Per-image cap across classes by global score sort.
  std::map<int, std::vector<Detection>> per_image;
  for (const Detection& d : dets) per_image[d.box.image_id].push_back(d);
  std::vector<Detection> capped;
  for (auto& [image_id, list] : per_image) {
    std::vector<int> order = score_order(list);
    int limit = std::min<int>(max_dets, static_cast<int>(order.size()));
    for (int i = 0; i < limit; ++i) capped.push_back(list[order[i]]);
  }

  std::vector<double> thresholds = coco_iou_thresholds();
  int total_gt = 0;
  for (int c = 1; c <= num_classes; ++c) total_gt += count_matchable(filter_class(gts, c));
  if (total_gt == 0) return 0.0;

  double recall_sum = 0.0;
  for (double t : thresholds) {
    int tp = 0;
    for (int c = 1; c <= num_classes; ++c) {
      MatchResult m = match_detections(filter_class(capped, c), filter_class(gts, c), t);
      for (DetMatch f : m.flags) {
        if (f == DetMatch::kTruePositive) ++tp;
      }
    }
    recall_sum += static_cast<double>(tp) / total_gt;
  }
  return recall_sum / thresholds.size();
}

EvalResult evaluate_all(const std::vector<Detection>& dets, const std::vector<GroundTruthObject>& gts,
                        int num_classes, int max_dets) {
  EvalResult r = coco_map(dets, gts, num_classes);
  r.average_recall = average_recall(dets, gts, num_classes, max_dets);

  struct Bucket {
    double lo, hi;
    double* ap;
    double* ar;
  };
  const Bucket buckets[3] = {
      {0.0, kSmallAreaMax, &r.ap_small, &r.ar_small},
      {kSmallAreaMax, kMediumAreaMax, &r.ap_medium, &r.ar_medium},
      {kMediumAreaMax, 1e300, &r.ap_large, &r.ar_large},
  };
  for (const Bucket& b : buckets) {
    std::vector<GroundTruthObject> bucket_gts = bucketize(gts, b.lo, b.hi);
    EvalResult sub = coco_map(dets, bucket_gts, num_classes);
    *b.ap = sub.map_coco;
    *b.ar = average_recall(dets, bucket_gts, num_classes, max_dets);
  }
  return r;
}

}  // namespace ion
