#include "ion/synth.hpp"

#include <algorithm>
#include <cmath>

namespace ion {

namespace {

struct ShapeSpec {
  int class_id = 0;
  double cx = 0.0, cy = 0.0;
  double w = 0.0, h = 0.0;
};

bool inside_shape(const ShapeSpec& s, double x, double y) {
  double dx = x - s.cx, dy = y - s.cy;
  switch (s.class_id) {
    case 1:  // rectangle
      return std::abs(dx) <= s.w / 2 && std::abs(dy) <= s.h / 2;
    case 2: {  // disc (ellipse when w != h)
      double nx = dx / (s.w / 2), ny = dy / (s.h / 2);
      return nx * nx + ny * ny <= 1.0;
    }
    case 3: {  // upward triangle
      if (dy < -s.h / 2 || dy > s.h / 2) return false;
      double frac = (dy + s.h / 2) / s.h;  // 0 at apex, 1 at base
      return std::abs(dx) <= frac * s.w / 2;
    }
    default:
      return false;
  }
}

RoiBox shape_box(const ShapeSpec& s, int image_id) {
  RoiBox b;
  b.image_id = image_id;
  b.x1 = s.cx - s.w / 2;
  b.y1 = s.cy - s.h / 2;
  b.x2 = s.cx + s.w / 2;
  b.y2 = s.cy + s.h / 2;
  return b;
}

// Per-class base colors, distinct enough to be learnable at desk scale.
const double kBaseColor[4][3] = {
    {0.0, 0.0, 0.0},
    {0.82, 0.25, 0.20},  // rectangle: red
    {0.20, 0.75, 0.30},  // disc: green
    {0.25, 0.30, 0.85},  // triangle: blue
};

RoiBox jitter_box(const RoiBox& b, double frac, double img, Rng* rng) {
  double w = b.width(), h = b.height();
  RoiBox j = b;
  j.x1 += rng->gaussian(0.0, frac * w);
  j.y1 += rng->gaussian(0.0, frac * h);
  j.x2 += rng->gaussian(0.0, frac * w);
  j.y2 += rng->gaussian(0.0, frac * h);
  if (j.x2 < j.x1 + 2.0) j.x2 = j.x1 + 2.0;
  if (j.y2 < j.y1 + 2.0) j.y2 = j.y1 + 2.0;
  return clip_box(j, img, img);
}

}  // namespace

std::vector<SyntheticScene> generate_shapes_dataset(uint64_t seed, int n_images, const SynthConfig& config) {
  check(n_images >= 1, "generate_shapes_dataset: n_images must be >= 1");
  check(config.num_classes >= 1 && config.num_classes <= 3, "generate_shapes_dataset: 1..3 classes supported");
  const int S = config.image_size;
  std::vector<SyntheticScene> scenes;
  Rng master(seed);

  for (int img = 0; img < n_images; ++img) {
    Rng rng = master.fork(static_cast<uint64_t>(img) + 1);
    SyntheticScene scene;
    scene.image_id = img;
    scene.image = FeatureMap(3, S, S);
    scene.pixel_classes.assign(static_cast<size_t>(S) * S, 0);

    // Noisy gray background with a mild per-image tint.
    double tint[3] = {rng.uniform(0.35, 0.55), rng.uniform(0.35, 0.55), rng.uniform(0.35, 0.55)};
    for (int c = 0; c < 3; ++c) {
      for (int i = 0; i < S * S; ++i) {
        scene.image.v[static_cast<size_t>(c) * S * S + i] = tint[c] + rng.uniform(-0.08, 0.08);
      }
    }

    int n_objects = config.min_objects + rng.uniform_int(config.max_objects - config.min_objects + 1);
    std::vector<ShapeSpec> shapes;
    for (int o = 0; o < n_objects; ++o) {
      ShapeSpec s;
      s.class_id = 1 + rng.uniform_int(config.num_classes);
      double side = rng.uniform(config.min_side, config.max_side);
      s.w = side * rng.uniform(0.8, 1.25);
      s.h = side * rng.uniform(0.8, 1.25);
      s.cx = rng.uniform(s.w / 2 + 1.0, S - s.w / 2 - 1.0);
      s.cy = rng.uniform(s.h / 2 + 1.0, S - s.h / 2 - 1.0);

      // Avoid heavy overlap so boxes stay well-defined.
      bool ok = true;
      RoiBox nb = shape_box(s, img);
      for (const ShapeSpec& prev : shapes) {
        if (iou(nb, shape_box(prev, img)) > 0.25) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      shapes.push_back(s);

      double color[3];
      for (int c = 0; c < 3; ++c) color[c] = std::clamp(kBaseColor[s.class_id][c] + rng.uniform(-0.08, 0.08), 0.0, 1.0);
      int x_lo = std::max(0, static_cast<int>(std::floor(nb.x1)));
      int x_hi = std::min(S - 1, static_cast<int>(std::ceil(nb.x2)));
      int y_lo = std::max(0, static_cast<int>(std::floor(nb.y1)));
      int y_hi = std::min(S - 1, static_cast<int>(std::ceil(nb.y2)));
      for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
          if (!inside_shape(s, x + 0.5, y + 0.5)) continue;
          for (int c = 0; c < 3; ++c) {
            scene.image.v[(static_cast<size_t>(c) * S + y) * S + x] = color[c] + rng.uniform(-0.04, 0.04);
          }
          scene.pixel_classes[static_cast<size_t>(y) * S + x] = s.class_id;
        }
      }

      GroundTruthObject gt;
      gt.class_id = s.class_id;
      gt.box = nb;
      scene.objects.push_back(gt);
    }

    // Proposals: jittered copies of ground truth (small objects dropped more
    // often, mirroring weak proposal recall on small objects) plus random
    // background boxes.
    for (const GroundTruthObject& gt : scene.objects) {
      bool small = std::min(gt.box.width(), gt.box.height()) < config.small_side;
      double keep = small ? config.small_keep_prob : config.large_keep_prob;
      if (rng.uniform01() > keep) continue;
      for (int k = 0; k < config.jitters_per_object; ++k) {
        scene.proposals.push_back(jitter_box(gt.box, config.jitter_frac, S, &rng));
      }
    }
    for (int k = 0; k < config.random_proposals; ++k) {
      RoiBox b;
      b.image_id = img;
      double w = rng.uniform(6.0, 40.0), h = rng.uniform(6.0, 40.0);
      b.x1 = rng.uniform(0.0, S - w);
      b.y1 = rng.uniform(0.0, S - h);
      b.x2 = b.x1 + w;
      b.y2 = b.y1 + h;
      scene.proposals.push_back(clip_box(b, S, S));
    }
    // A scene is guaranteed at least one proposal.
    if (scene.proposals.empty()) {
      RoiBox b;
      b.image_id = img;
      b.x2 = b.y2 = S;
      scene.proposals.push_back(b);
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

FeatureMap flip_image_lr(const FeatureMap& image) {
  FeatureMap out(image.channels, image.height, image.width);
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        out.at(c, y, x) = image.at(c, y, image.width - 1 - x);
      }
    }
  }
  return out;
}

RoiBox flip_roi_lr(const RoiBox& roi, double image_width) {
  RoiBox out = roi;
  out.x1 = image_width - roi.x2;
  out.x2 = image_width - roi.x1;
  return out;
}

double proposal_recall(const std::vector<SyntheticScene>& scenes, double iou_thresh, double min_side,
                       double max_side) {
  long covered = 0, total = 0;
  for (const SyntheticScene& scene : scenes) {
    for (const GroundTruthObject& gt : scene.objects) {
      double side = std::min(gt.box.width(), gt.box.height());
      if (side < min_side || side >= max_side) continue;
      ++total;
      for (const RoiBox& p : scene.proposals) {
        if (iou(p, gt.box) >= iou_thresh) {
          ++covered;
          break;
        }
      }
    }
  }
  return total > 0 ? static_cast<double>(covered) / total : 0.0;
}

}  // namespace ion
