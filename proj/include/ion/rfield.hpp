#ifndef ION_RFIELD_HPP_
#define ION_RFIELD_HPP_

#include <string>
#include <vector>

#include "ion/tensor.hpp"

namespace ion {

// Perturbation probe: nudge the center input cell and report which output
// cells respond. Operators use positive weights and positive inputs so the
// ReLU path never clips and dependence cannot cancel.
struct RfieldReport {
  std::string op;
  int in_height = 0, in_width = 0;
  int y0 = 0, y1 = -1, x0 = 0, x1 = -1;  // inclusive bounding window of affected cells
  int window_h = 0, window_w = 0;
  bool full_image = false;
  bool spatially_constant = false;  // every affected cell sees the same per-channel delta
};

// op: conv3x3x2 | conv5x5x2 | gap | irnn | irnn2dir  (irnn2dir probes the
// two-direction variant after its first, left-right-only layer).
RfieldReport receptive_field_probe(const std::string& op, int channels, int height, int width, uint64_t seed);

std::vector<std::string> rfield_operator_names();

}  // namespace ion

#endif  // ION_RFIELD_HPP_
