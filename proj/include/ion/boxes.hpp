#ifndef ION_BOXES_HPP_
#define ION_BOXES_HPP_

#include <vector>

#include "ion/tensor.hpp"

namespace ion {

// Axis-aligned box in continuous image coordinates, x2 >= x1 and y2 >= y1.
struct RoiBox {
  int image_id = 0;
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool ordered() const { return x2 >= x1 && y2 >= y1; }
};

// Intersection over union; 0 when the union is empty.
double iou(const RoiBox& a, const RoiBox& b);

RoiBox clip_box(const RoiBox& box, double img_w, double img_h);

// Center-offset / log-size box regression parameterization.
struct BoxDelta {
  double dx = 0.0, dy = 0.0, dw = 0.0, dh = 0.0;
};

// Exp-overflow guard applied to dw/dh at decode time.
constexpr double kDeltaClamp = 4.0;

BoxDelta encode_delta(const RoiBox& proposal, const RoiBox& target);
RoiBox decode_delta(const RoiBox& proposal, const BoxDelta& delta);
RoiBox decode_delta(const RoiBox& proposal, const BoxDelta& delta, double img_w, double img_h);

struct Detection {
  int class_id = 0;
  double score = 0.0;
  RoiBox box;
};

struct GroundTruthObject {
  int class_id = 0;
  RoiBox box;
  bool difficult = false;
};

}  // namespace ion

#endif  // ION_BOXES_HPP_
