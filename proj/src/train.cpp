#include "ion/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ion {

double lr_at(const LrSchedule& schedule, int iter) {
  check(schedule.lr_start > 0.0 && schedule.lr_end > 0.0, "lr_at: rates must be positive");
  check(iter >= 0 && iter <= schedule.total_iters, "lr_at: iteration out of schedule range");
  if (iter == 0) return schedule.lr_start;
  if (iter == schedule.total_iters) return schedule.lr_end;
  double t = static_cast<double>(iter) / schedule.total_iters;
  return schedule.lr_start * std::pow(schedule.lr_end / schedule.lr_start, t);
}

std::vector<double> clip_gradient(const std::vector<double>& grad, double threshold) {
  check(threshold > 0.0, "clip_gradient: threshold must be positive");
  double ss = 0.0;
  for (double g : grad) ss += g * g;
  double norm = std::sqrt(ss);
  if (norm <= threshold) return grad;
  std::vector<double> out = grad;
  double scale = threshold / norm;
  for (double& g : out) g *= scale;
  return out;
}

std::vector<SampledRoi> sample_rois(const std::vector<RoiBox>& proposals, const std::vector<GroundTruthObject>& gts,
                                    const TrainConfig& config, Rng* rng) {
  check(!proposals.empty(), "sample_rois: need at least one proposal");
  const int n = config.rois_per_image;

  // Best ground truth per proposal.
  std::vector<double> best_iou(proposals.size(), 0.0);
  std::vector<int> best_gt(proposals.size(), -1);
  for (size_t p = 0; p < proposals.size(); ++p) {
    for (size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].difficult) continue;
      double ov = iou(proposals[p], gts[g].box);
      if (ov > best_iou[p]) {
        best_iou[p] = ov;
        best_gt[p] = static_cast<int>(g);
      }
    }
  }

  std::vector<int> fg_pool, bg_pool;
  for (size_t p = 0; p < proposals.size(); ++p) {
    if (best_iou[p] >= config.fg_iou && proposals[p].width() > 0.0 && proposals[p].height() > 0.0) {
      fg_pool.push_back(static_cast<int>(p));
    } else if (best_iou[p] >= config.bg_iou_lo && best_iou[p] < config.bg_iou_hi) {
      bg_pool.push_back(static_cast<int>(p));
    }
  }
  if (bg_pool.empty()) {
    // Fall back to the lowest-IoU proposals.
    std::vector<int> order(proposals.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return best_iou[a] < best_iou[b]; });
    int take = std::min<int>(static_cast<int>(order.size()), std::max(1, n / 4));
    bg_pool.assign(order.begin(), order.begin() + take);
  }

  int fg_quota = fg_pool.empty() ? 0 : static_cast<int>(std::lround(n * config.fg_fraction));
  fg_quota = std::min(fg_quota, n);
  int bg_quota = n - fg_quota;

  rng->shuffle(fg_pool);
  rng->shuffle(bg_pool);

  std::vector<SampledRoi> out;
  out.reserve(n);
  for (int i = 0; i < fg_quota; ++i) {
    int p = fg_pool[i % fg_pool.size()];  // repetition fills shortfall
    SampledRoi roi;
    roi.box = proposals[p];
    roi.target.label = gts[best_gt[p]].class_id;
    roi.target.delta = encode_delta(proposals[p], gts[best_gt[p]].box);
    out.push_back(roi);
  }
  for (int i = 0; i < bg_quota; ++i) {
    int p = bg_pool[i % bg_pool.size()];
    SampledRoi roi;
    roi.box = proposals[p];
    roi.target.label = 0;
    out.push_back(roi);
  }
  return out;
}

SgdOptimizer::SgdOptimizer(ParamRegistry* registry, double momentum) : registry_(registry), momentum_(momentum) {
  for (const ParamEntry& e : registry->entries()) velocity_.emplace_back(e.values->size(), 0.0);
  frozen_.assign(registry->entries().size(), 0);
}

void SgdOptimizer::set_frozen(const std::vector<std::string>& prefixes) {
  frozen_.assign(registry_->entries().size(), 0);
  for (const std::string& prefix : prefixes) {
    bool matched = false;
    for (size_t i = 0; i < registry_->entries().size(); ++i) {
      const std::string& name = registry_->entries()[i].name;
      if (name.rfind(prefix, 0) == 0 && (name.size() == prefix.size() || name[prefix.size()] == '.')) {
        frozen_[i] = 1;
        matched = true;
      }
    }
    check(matched, "SgdOptimizer: freeze prefix '" + prefix + "' matches no parameter");
  }
}

void SgdOptimizer::step(double lr) {
  auto& entries = registry_->entries();
  for (size_t i = 0; i < entries.size(); ++i) {
    if (frozen_[i]) continue;
    std::vector<double>& v = velocity_[i];
    std::vector<double>& w = *entries[i].values;
    const std::vector<double>& g = entries[i].grad;
    for (size_t k = 0; k < w.size(); ++k) {
      v[k] = momentum_ * v[k] + lr * g[k];
      w[k] -= v[k];
    }
  }
}

StepReport train_step_accumulating(IonModel* model, SgdOptimizer* opt,
                                   const std::vector<const SyntheticScene*>& scenes, const TrainConfig& config,
                                   double lr, Rng* rng) {
  check(static_cast<int>(scenes.size()) == config.images_per_update,
        "train_step_accumulating: scene count must equal images_per_update");
  ParamRegistry& reg = model->params();
  reg.zero_grads();

  StepReport report;
  report.lr = lr;

  std::vector<std::vector<double>> before;  // per-image clipping snapshot
  for (const SyntheticScene* scene : scenes) {
    if (config.clip_mode == ClipMode::kPerImage) {
      before.clear();
      for (const ParamEntry& e : reg.entries()) before.push_back(e.grad);
    }
    std::vector<SampledRoi> rois = sample_rois(scene->proposals, scene->objects, config, rng);
    LossReport lr_rep = model->forward_backward(*scene, rois, rng);
    if (!std::isfinite(lr_rep.total)) {
      throw std::runtime_error("train_step_accumulating: non-finite loss on image " +
                               std::to_string(scene->image_id));
    }
    report.loss_cls += lr_rep.cls;
    report.loss_bbox += lr_rep.bbox;
    report.loss_seg += lr_rep.seg;
    report.loss_total += lr_rep.total;

    if (config.clip_mode == ClipMode::kPerImage) {
      // Clip this image's contribution alone at the single-image threshold.
      double ss = 0.0;
      auto& entries = reg.entries();
      for (size_t i = 0; i < entries.size(); ++i) {
        for (size_t k = 0; k < entries[i].grad.size(); ++k) {
          double d = entries[i].grad[k] - before[i][k];
          ss += d * d;
        }
      }
      double norm = std::sqrt(ss);
      if (norm > config.clip_norm_single) {
        double scale = config.clip_norm_single / norm;
        for (size_t i = 0; i < entries.size(); ++i) {
          for (size_t k = 0; k < entries[i].grad.size(); ++k) {
            entries[i].grad[k] = before[i][k] + scale * (entries[i].grad[k] - before[i][k]);
          }
        }
      }
    }
  }

  if (config.clip_mode == ClipMode::kAccumulated) {
    report.grad_norm = reg.clip_grad_norm(config.clip_norm_accum);
  } else {
    // Per-image contributions were already clipped at the single-image
    // threshold; their sum is bounded by images_per_update * clip_norm_single.
    report.grad_norm = reg.grad_norm();
  }
  opt->step(lr);

  int n = static_cast<int>(scenes.size());
  report.loss_cls /= n;
  report.loss_bbox /= n;
  report.loss_seg /= n;
  report.loss_total /= n;
  return report;
}

TrainResult run_staged_training(IonModel* model, const std::vector<SyntheticScene>& dataset,
                                const TrainConfig& config) {
  check(!dataset.empty(), "run_staged_training: empty dataset");
  TrainResult result;
  SgdOptimizer opt(&model->params(), config.momentum);
  Rng rng(config.seed);

  std::vector<int> order;
  size_t cursor = 0;
  auto next_scene = [&]() -> const SyntheticScene* {
    if (cursor >= order.size()) {
      order.resize(dataset.size());
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);
      cursor = 0;
    }
    return &dataset[order[cursor++]];
  };

  for (size_t s = 0; s < config.stages.size(); ++s) {
    const StageConfig& stage = config.stages[s];
    opt.set_frozen(stage.freeze);
    LrSchedule sched = stage.lr;
    sched.total_iters = stage.iters > 0 ? stage.iters : 1;
    for (int it = 0; it < stage.iters; ++it) {
      std::vector<const SyntheticScene*> batch;
      for (int i = 0; i < config.images_per_update; ++i) batch.push_back(next_scene());
      StepReport rep = train_step_accumulating(model, &opt, batch, config, lr_at(sched, it), &rng);
      rep.stage = static_cast<int>(s) + 1;
      rep.iter = it;
      result.curve.push_back(rep);
    }
  }
  return result;
}

std::vector<Detection> detect_dataset(const IonModel& model, const std::vector<SyntheticScene>& scenes,
                                      const VotingConfig& voting, bool flip_augment) {
  std::vector<Detection> all;
  for (const SyntheticScene& scene : scenes) {
    std::vector<Detection> dets = model.detect_scene(scene, voting, flip_augment);
    all.insert(all.end(), dets.begin(), dets.end());
  }
  return all;
}

std::vector<GroundTruthObject> collect_ground_truth(const std::vector<SyntheticScene>& scenes) {
  std::vector<GroundTruthObject> all;
  for (const SyntheticScene& scene : scenes) {
    all.insert(all.end(), scene.objects.begin(), scene.objects.end());
  }
  return all;
}

}  // namespace ion
