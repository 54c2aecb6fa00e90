#ifndef ION_EXPERIMENT_HPP_
#define ION_EXPERIMENT_HPP_

#include <string>

#include "ion/config.hpp"
#include "ion/model.hpp"
#include "ion/synth.hpp"
#include "ion/train.hpp"

namespace ion {

// Everything one experiment run needs, assembled from a flat key/value file.
// Unknown keys are rejected; every knob has a documented default.
struct ExperimentConfig {
  uint64_t seed = 17;
  int train_images = 2000;
  int test_images = 200;
  SynthConfig synth;
  ModelConfig model;
  TrainConfig train;
  VotingConfig detect;
  bool flip_augment = false;
};

ExperimentConfig experiment_from_kv(KeyValueConfig& kv);
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& text);

NormMode norm_mode_from_string(const std::string& s);
ScaleMode scale_mode_from_string(const std::string& s);

}  // namespace ion

#endif  // ION_EXPERIMENT_HPP_
