// Command-line driver for the detection lab: gradient verification,
// receptive-field probes, toy training, detection, post-processing,
// evaluation, threshold search, and synthetic data generation.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "ion/eval.hpp"
#include "ion/experiment.hpp"
#include "ion/gradcheck_suite.hpp"
#include "ion/jsonl.hpp"
#include "ion/rfield.hpp"
#include "ion/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitVerification = 3;

// Test scenes come from an independent stream of the experiment seed.
uint64_t test_split_seed(uint64_t seed) { return seed * 0x9e3779b97f4a7c15ULL + 1000003ULL; }

ion::ExperimentConfig load_config(const std::string& path, int64_t seed_override) {
  ion::ExperimentConfig cfg = ion::load_experiment_config(path);
  if (seed_override >= 0) {
    cfg.seed = static_cast<uint64_t>(seed_override);
    cfg.train.seed = cfg.seed;
  }
  return cfg;
}

std::vector<ion::SyntheticScene> make_split(const ion::ExperimentConfig& cfg, const std::string& split) {
  if (split == "train") return ion::generate_shapes_dataset(cfg.seed, cfg.train_images, cfg.synth);
  if (split == "test") return ion::generate_shapes_dataset(test_split_seed(cfg.seed), cfg.test_images, cfg.synth);
  throw std::invalid_argument("unknown split '" + split + "' (expected train|test)");
}

int cmd_gradcheck(int instances, uint64_t seed, double tolerance, const std::string& corrupt_op) {
  std::vector<ion::GradCheckReport> reports = ion::run_gradcheck_suite(instances, seed, corrupt_op);
  bool ok = true;
  for (const ion::GradCheckReport& r : reports) {
    bool pass = r.max_rel_error <= tolerance;
    ok = ok && pass;
    std::printf("%-32s max_rel_error=%.3e  instances=%d  eps=%.1e  %s\n", r.op_name.c_str(), r.max_rel_error,
                r.num_probes, r.epsilon, pass ? "ok" : "FAIL");
  }
  std::printf("gradcheck: %zu ops, tolerance %.1e: %s\n", reports.size(), tolerance, ok ? "all ok" : "FAILED");
  return ok ? kExitOk : kExitVerification;
}

int cmd_rfield(const std::string& op, int channels, int height, int width, uint64_t seed) {
  ion::RfieldReport r = ion::receptive_field_probe(op, channels, height, width, seed);
  std::printf("operator=%s input=%dx%dx%d\n", r.op.c_str(), channels, height, width);
  std::printf("affected window: rows [%d, %d], cols [%d, %d] -> %dx%d\n", r.y0, r.y1, r.x0, r.x1, r.window_h,
              r.window_w);
  std::printf("full_image=%s spatially_constant=%s\n", r.full_image ? "yes" : "no",
              r.spatially_constant ? "yes" : "no");
  return kExitOk;
}

void write_metrics_csv(const std::string& path, const std::vector<ion::StepReport>& curve) {
  std::ofstream os(path);
  ion::check(os.good(), "cannot open metrics file " + path);
  os << "stage,iter,lr,loss_cls,loss_bbox,loss_seg,loss_total,grad_norm\n";
  char buf[256];
  for (const ion::StepReport& r : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", r.stage, r.iter, r.lr, r.loss_cls,
                  r.loss_bbox, r.loss_seg, r.loss_total, r.grad_norm);
    os << buf;
  }
}

int cmd_train(const std::string& config_path, int64_t seed_override, const std::string& out_ckpt,
              const std::string& metrics_csv, bool eval_after) {
  ion::ExperimentConfig cfg = load_config(config_path, seed_override);
  std::vector<ion::SyntheticScene> train_scenes = make_split(cfg, "train");
  ion::IonModel model(cfg.model, cfg.seed);
  std::printf("training: %d scenes, %zu parameters, %zu stages\n", cfg.train_images,
              model.params().total_values(), cfg.train.stages.size());
  ion::TrainResult result = ion::run_staged_training(&model, train_scenes, cfg.train);
  if (!result.curve.empty()) {
    const ion::StepReport& last = result.curve.back();
    std::printf("final: stage %d iter %d loss=%.4f (cls %.4f bbox %.4f seg %.4f)\n", last.stage, last.iter,
                last.loss_total, last.loss_cls, last.loss_bbox, last.loss_seg);
  }
  if (!metrics_csv.empty()) write_metrics_csv(metrics_csv, result.curve);
  model.params().save_file(out_ckpt);
  std::printf("checkpoint written to %s\n", out_ckpt.c_str());

  if (eval_after) {
    std::vector<ion::SyntheticScene> test_scenes = make_split(cfg, "test");
    std::vector<ion::Detection> dets = ion::detect_dataset(model, test_scenes, cfg.detect, cfg.flip_augment);
    ion::EvalResult ev =
        ion::evaluate_all(dets, ion::collect_ground_truth(test_scenes), cfg.model.num_classes, cfg.detect.max_per_image);
    std::printf("eval: mAP@0.5=%.4f mAP@[.5:.95]=%.4f AR=%.4f\n", ev.map50, ev.map_coco, ev.average_recall);
  }
  return kExitOk;
}

int cmd_detect(const std::string& config_path, int64_t seed_override, const std::string& ckpt,
               const std::string& out_path, const std::string& split, bool final_stage, bool flip) {
  ion::ExperimentConfig cfg = load_config(config_path, seed_override);
  std::vector<ion::SyntheticScene> scenes = make_split(cfg, split);
  ion::IonModel model(cfg.model, cfg.seed);
  model.params().load_file(ckpt);

  std::vector<ion::Detection> all;
  for (const ion::SyntheticScene& scene : scenes) {
    std::vector<ion::Detection> dets = final_stage ? model.detect_scene(scene, cfg.detect, flip || cfg.flip_augment)
                                                   : model.pool_scene(scene, cfg.detect, flip || cfg.flip_augment);
    all.insert(all.end(), dets.begin(), dets.end());
  }
  ion::write_detections(out_path, all);
  std::printf("%zu detections (%s) for %zu scenes written to %s\n", all.size(),
              final_stage ? "final" : "raw pool", scenes.size(), out_path.c_str());
  return kExitOk;
}

int cmd_postprocess(const std::string& in_path, const std::string& out_path, double nms_iou, double vote_iou,
                    bool use_vote, double score_thresh, int max_per_image) {
  std::vector<ion::Detection> pool = ion::read_detections(in_path);
  ion::VotingConfig vc;
  vc.nms_iou = nms_iou;
  vc.vote_iou = vote_iou;
  vc.use_vote = use_vote;
  vc.score_thresh = score_thresh;
  vc.max_per_image = max_per_image;
  std::vector<ion::Detection> final_dets = ion::postprocess_detections(pool, vc);
  ion::write_detections(out_path, final_dets);
  std::printf("%zu -> %zu detections written to %s\n", pool.size(), final_dets.size(), out_path.c_str());
  return kExitOk;
}

int cmd_eval(const std::string& dets_path, const std::string& gts_path, int num_classes, int max_dets) {
  std::vector<ion::Detection> dets = ion::read_detections(dets_path);
  std::vector<ion::GroundTruthObject> gts = ion::read_ground_truth(gts_path);
  ion::EvalResult ev = ion::evaluate_all(dets, gts, num_classes, max_dets);

  std::printf("%-8s", "class");
  for (double t : ev.iou_thresholds) std::printf("  AP@%.2f", t);
  std::printf("\n");
  for (const auto& [cls, aps] : ev.per_class_ap) {
    std::printf("%-8d", cls);
    for (double ap : aps) std::printf("  %7.4f", ap);
    std::printf("\n");
  }
  std::printf("map50 = %.6f\n", ev.map50);
  std::printf("map_coco = %.6f\n", ev.map_coco);
  std::printf("average_recall = %.6f\n", ev.average_recall);
  std::printf("ap_small = %.6f\nap_medium = %.6f\nap_large = %.6f\n", ev.ap_small, ev.ap_medium, ev.ap_large);
  std::printf("ar_small = %.6f\nar_medium = %.6f\nar_large = %.6f\n", ev.ar_small, ev.ar_medium, ev.ar_large);
  return kExitOk;
}

int cmd_threshsearch(const std::string& dets_path, const std::string& gts_path, int num_classes, int samples,
                     uint64_t seed, double score_thresh, int max_per_image) {
  std::vector<ion::Detection> dets = ion::read_detections(dets_path);
  std::vector<ion::GroundTruthObject> gts = ion::read_ground_truth(gts_path);
  ion::VotingConfig base;
  base.score_thresh = score_thresh;
  base.max_per_image = max_per_image;
  ion::Rng rng(seed);
  ion::ThresholdSearchResult best = ion::threshold_search(dets, gts, num_classes, samples, base, &rng);
  std::printf("best nms_iou = %.6f\nbest vote_iou = %.6f\nbest map_coco = %.6f\n", best.nms_iou, best.vote_iou,
              best.map);
  return kExitOk;
}

int cmd_gen_data(const std::string& config_path, int64_t seed_override, const std::string& split,
                 const std::string& out_gts, const std::string& out_proposals) {
  ion::ExperimentConfig cfg = load_config(config_path, seed_override);
  std::vector<ion::SyntheticScene> scenes = make_split(cfg, split);
  ion::write_ground_truth(out_gts, ion::collect_ground_truth(scenes));
  size_t n_props = 0;
  for (const ion::SyntheticScene& s : scenes) n_props += s.proposals.size();
  if (!out_proposals.empty()) {
    // Proposals are stored as zero-score class-0 detections.
    std::vector<ion::Detection> props;
    for (const ion::SyntheticScene& s : scenes) {
      for (const ion::RoiBox& b : s.proposals) props.push_back({0, 0.0, b});
    }
    ion::write_detections(out_proposals, props);
  }
  double recall_all = ion::proposal_recall(scenes, 0.5, 0.0, 1e9);
  double recall_small = ion::proposal_recall(scenes, 0.5, 0.0, cfg.synth.small_side);
  double recall_large = ion::proposal_recall(scenes, 0.5, cfg.synth.small_side, 1e9);
  std::printf("%zu scenes, %zu proposals -> %s\n", scenes.size(), n_props, out_gts.c_str());
  std::printf("proposal recall@0.5: all=%.4f small=%.4f large=%.4f\n", recall_all, recall_small, recall_large);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ion: context + skip-pooling detection lab"};
  app.require_subcommand(1);

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference verification of every differentiable op");
  int gc_instances = 5;
  uint64_t gc_seed = 7;
  double gc_tol = 1e-5;
  std::string gc_corrupt;
  gc->add_option("--instances", gc_instances, "random instances per op");
  gc->add_option("--seed", gc_seed, "RNG seed");
  gc->add_option("--tolerance", gc_tol, "max relative error allowed");
  gc->add_option("--corrupt-op", gc_corrupt, "negative control: corrupt this op's analytic gradient");

  // rfield
  auto* rf = app.add_subcommand("rfield", "receptive field of a context operator via perturbation");
  std::string rf_op = "irnn";
  int rf_c = 2, rf_h = 15, rf_w = 15;
  uint64_t rf_seed = 7;
  rf->add_option("--operator", rf_op, "conv3x3x2|conv5x5x2|gap|irnn|irnn2dir")->required();
  rf->add_option("--channels", rf_c, "input channels");
  rf->add_option("--height", rf_h, "input height");
  rf->add_option("--width", rf_w, "input width");
  rf->add_option("--seed", rf_seed, "RNG seed");

  // train
  auto* tr = app.add_subcommand("train", "deterministic staged training on the synthetic shapes dataset");
  std::string tr_config, tr_out = "checkpoint.ion", tr_csv;
  int64_t tr_seed = -1;
  bool tr_eval = false;
  tr->add_option("--config", tr_config, "experiment config file")->required();
  tr->add_option("--seed", tr_seed, "override config seed");
  tr->add_option("--out", tr_out, "checkpoint output path");
  tr->add_option("--metrics", tr_csv, "metrics CSV output path");
  tr->add_flag("--eval", tr_eval, "evaluate on the test split after training");

  // detect
  auto* de = app.add_subcommand("detect", "run the detector over a synthetic split");
  std::string de_config, de_ckpt, de_out = "detections.jsonl", de_split = "test";
  int64_t de_seed = -1;
  bool de_final = false, de_flip = false;
  de->add_option("--config", de_config, "experiment config file")->required();
  de->add_option("--checkpoint", de_ckpt, "checkpoint to load")->required();
  de->add_option("--out", de_out, "detections JSONL output");
  de->add_option("--split", de_split, "train|test");
  de->add_option("--seed", de_seed, "override config seed");
  de->add_flag("--final", de_final, "apply NMS/voting/caps instead of emitting the raw pool");
  de->add_flag("--flip", de_flip, "average predictions with the mirrored image");

  // postprocess
  auto* pp = app.add_subcommand("postprocess", "NMS + weighted voting + caps over a raw detection pool");
  std::string pp_in, pp_out = "final.jsonl";
  double pp_nms = 0.3, pp_vote = 0.5, pp_score = 0.05;
  int pp_max = 100;
  bool pp_novote = false;
  pp->add_option("--in", pp_in, "raw detection pool JSONL")->required();
  pp->add_option("--out", pp_out, "output JSONL");
  pp->add_option("--nms-iou", pp_nms, "NMS IoU threshold");
  pp->add_option("--vote-iou", pp_vote, "weighted-vote IoU threshold");
  pp->add_flag("--no-vote", pp_novote, "disable box voting");
  pp->add_option("--score-thresh", pp_score, "minimum score");
  pp->add_option("--max-per-image", pp_max, "per-image detection cap");

  // eval
  auto* ev = app.add_subcommand("eval", "PR/AP evaluation of detections against ground truth");
  std::string ev_dets, ev_gts;
  int ev_classes = 3, ev_max = 100;
  ev->add_option("--dets", ev_dets, "detections JSONL")->required();
  ev->add_option("--gts", ev_gts, "ground-truth JSONL")->required();
  ev->add_option("--classes", ev_classes, "number of foreground classes");
  ev->add_option("--max-dets", ev_max, "per-image cap for average recall");

  // threshsearch
  auto* ts = app.add_subcommand("threshsearch", "joint random search over NMS/vote IoU thresholds");
  std::string ts_dets, ts_gts;
  int ts_classes = 3, ts_samples = 200, ts_max = 100;
  uint64_t ts_seed = 7;
  double ts_score = 0.05;
  ts->add_option("--dets", ts_dets, "raw detection pool JSONL")->required();
  ts->add_option("--gts", ts_gts, "ground-truth JSONL")->required();
  ts->add_option("--classes", ts_classes, "number of foreground classes");
  ts->add_option("--samples", ts_samples, "random threshold pairs to try");
  ts->add_option("--seed", ts_seed, "RNG seed");
  ts->add_option("--score-thresh", ts_score, "minimum score");
  ts->add_option("--max-per-image", ts_max, "per-image detection cap");

  // gen-data
  auto* gd = app.add_subcommand("gen-data", "generate the synthetic shapes dataset and export ground truth");
  std::string gd_config, gd_split = "test", gd_gts = "gts.jsonl", gd_props;
  int64_t gd_seed = -1;
  gd->add_option("--config", gd_config, "experiment config file")->required();
  gd->add_option("--split", gd_split, "train|test");
  gd->add_option("--out-gts", gd_gts, "ground-truth JSONL output");
  gd->add_option("--out-proposals", gd_props, "optional proposal JSONL output");
  gd->add_option("--seed", gd_seed, "override config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gc->parsed()) return cmd_gradcheck(gc_instances, gc_seed, gc_tol, gc_corrupt);
    if (rf->parsed()) return cmd_rfield(rf_op, rf_c, rf_h, rf_w, rf_seed);
    if (tr->parsed()) return cmd_train(tr_config, tr_seed, tr_out, tr_csv, tr_eval);
    if (de->parsed()) return cmd_detect(de_config, de_seed, de_ckpt, de_out, de_split, de_final, de_flip);
    if (pp->parsed()) return cmd_postprocess(pp_in, pp_out, pp_nms, pp_vote, !pp_novote, pp_score, pp_max);
    if (ev->parsed()) return cmd_eval(ev_dets, ev_gts, ev_classes, ev_max);
    if (ts->parsed()) return cmd_threshsearch(ts_dets, ts_gts, ts_classes, ts_samples, ts_seed, ts_score, ts_max);
    if (gd->parsed()) return cmd_gen_data(gd_config, gd_seed, gd_split, gd_gts, gd_props);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
