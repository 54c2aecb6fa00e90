#include "ion/experiment.hpp"

namespace ion {

NormMode norm_mode_from_string(const std::string& s) {
  if (s == "blob") return NormMode::kSumOverAllEntries;
  if (s == "channel") return NormMode::kSumAcrossChannels;
  if (s == "none") return NormMode::kNone;
  throw std::invalid_argument("unknown norm mode '" + s + "' (expected blob|channel|none)");
}

ScaleMode scale_mode_from_string(const std::string& s) {
  if (s == "learned") return ScaleMode::kLearnedPerChannel;
  if (s == "fixed") return ScaleMode::kFixed;
  throw std::invalid_argument("unknown scale mode '" + s + "' (expected learned|fixed)");
}

ExperimentConfig experiment_from_kv(KeyValueConfig& kv) {
  ExperimentConfig e;
  e.seed = static_cast<uint64_t>(kv.take_int("seed", 17));
  e.train_images = kv.take_int("train_images", 2000);
  e.test_images = kv.take_int("test_images", 200);

  int image_size = kv.take_int("image_size", 64);
  int num_classes = kv.take_int("num_classes", 3);
  e.synth.image_size = image_size;
  e.synth.num_classes = num_classes;
  e.model.image_size = image_size;
  e.model.num_classes = num_classes;

  e.model.backbone.c1 = kv.take_int("backbone.c1", 8);
  e.model.backbone.c2 = kv.take_int("backbone.c2", 16);
  e.model.backbone.c3 = kv.take_int("backbone.c3", 32);
  e.model.backbone.c4 = kv.take_int("backbone.c4", 32);
  e.model.backbone.c5 = kv.take_int("backbone.c5", 48);

  e.model.context = context_kind_from_string(kv.take_string("context.kind", "irnn"));
  e.model.irnn.num_layers = kv.take_int("context.layers", 2);
  e.model.irnn.hidden_units = kv.take_int("context.hidden", 48);
  e.model.irnn.learn_whh = kv.take_bool("context.learn_whh", true);
  e.model.irnn.use_first_step_bias = kv.take_bool("context.first_step_bias", false);
  e.model.irnn.two_direction = kv.take_bool("context.two_direction", false);
  e.model.irnn.dropout_p = kv.take_double("context.dropout_p", 0.0);
  e.model.context_out_channels = kv.take_int("context.out_channels", 48);

  e.model.pool_sources = kv.take_list("pool.sources", {"conv3", "conv4", "conv5", "context"});
  e.model.pooled = kv.take_int("pool.pooled", 7);
  e.model.norm_mode = norm_mode_from_string(kv.take_string("pool.norm_mode", "blob"));
  e.model.scale_mode = scale_mode_from_string(kv.take_string("pool.scale_mode", "learned"));
  e.model.scale_init = kv.take_double("pool.scale_init", 0.0);
  e.model.reduced_channels = kv.take_int("pool.reduced_channels", 64);

  e.model.fc_dim = kv.take_int("head.fc_dim", 96);
  e.model.head_dropout = kv.take_double("head.dropout_p", 0.0);

  e.model.seg_enabled = kv.take_bool("seg.enabled", true);
  e.model.seg_loss_weight = kv.take_double("seg.loss_weight", 1.0);

  e.train.seed = e.seed;
  e.train.images_per_update = kv.take_int("train.images_per_update", 4);
  e.train.rois_per_image = kv.take_int("train.rois_per_image", 64);
  e.train.fg_fraction = kv.take_double("train.fg_fraction", 0.25);
  e.train.momentum = kv.take_double("train.momentum", 0.9);
  e.train.clip_norm_single = kv.take_double("train.clip_single", 20.0);
  e.train.clip_norm_accum = kv.take_double("train.clip_accum", 80.0);
  std::string clip_mode = kv.take_string("train.clip_mode", "accum");
  if (clip_mode == "accum") {
    e.train.clip_mode = ClipMode::kAccumulated;
  } else if (clip_mode == "per_image") {
    e.train.clip_mode = ClipMode::kPerImage;
  } else {
    throw std::invalid_argument("unknown clip mode '" + clip_mode + "' (expected accum|per_image)");
  }

  StageConfig s1;
  s1.iters = kv.take_int("train.stage1.iters", 150);
  s1.lr.lr_start = kv.take_double("train.stage1.lr_start", 5e-3);
  s1.lr.lr_end = kv.take_double("train.stage1.lr_end", 1e-4);
  s1.freeze = kv.take_list("train.stage1.freeze", {"conv1", "conv2", "conv3", "conv4", "conv5"});
  StageConfig s2;
  s2.iters = kv.take_int("train.stage2.iters", 450);
  s2.lr.lr_start = kv.take_double("train.stage2.lr_start", 1e-3);
  s2.lr.lr_end = kv.take_double("train.stage2.lr_end", 1e-5);
  s2.freeze = kv.take_list("train.stage2.freeze", {"conv1", "conv2"});
  e.train.stages = {s1, s2};

  e.detect.score_thresh = kv.take_double("detect.score_thresh", 0.05);
  e.detect.max_per_image = kv.take_int("detect.max_per_image", 100);
  e.detect.nms_iou = kv.take_double("detect.nms_iou", 0.3);
  e.detect.vote_iou = kv.take_double("detect.vote_iou", 0.5);
  e.detect.use_vote = kv.take_bool("detect.use_vote", true);
  e.detect.rounds = kv.take_int("detect.rounds", 1);
  e.flip_augment = kv.take_bool("detect.flip", false);

  kv.finish();
  return e;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  KeyValueConfig kv = KeyValueConfig::parse_file(path);
  return experiment_from_kv(kv);
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  KeyValueConfig kv = KeyValueConfig::parse_string(text);
  return experiment_from_kv(kv);
}

}  // namespace ion
