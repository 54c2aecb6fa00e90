#include "ion/boxes.hpp"

#include <algorithm>
#include <cmath>

namespace ion {

double iou(const RoiBox& a, const RoiBox& b) {
  double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  double inter = ix * iy;
  double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

RoiBox clip_box(const RoiBox& box, double img_w, double img_h) {
  RoiBox c = box;
  c.x1 = std::clamp(c.x1, 0.0, img_w);
  c.y1 = std::clamp(c.y1, 0.0, img_h);
  c.x2 = std::clamp(c.x2, 0.0, img_w);
  c.y2 = std::clamp(c.y2, 0.0, img_h);
  if (c.x2 < c.x1) c.x2 = c.x1;
  if (c.y2 < c.y1) c.y2 = c.y1;
  return c;
}

BoxDelta encode_delta(const RoiBox& proposal, const RoiBox& target) {
  double pw = proposal.width(), ph = proposal.height();
  check(pw > 0.0 && ph > 0.0, "encode_delta: degenerate proposal");
  check(target.width() > 0.0 && target.height() > 0.0, "encode_delta: degenerate target");
  double pcx = proposal.x1 + 0.5 * pw, pcy = proposal.y1 + 0.5 * ph;
  double tcx = target.x1 + 0.5 * target.width(), tcy = target.y1 + 0.5 * target.height();
  BoxDelta d;
  d.dx = (tcx - pcx) / pw;
  d.dy = (tcy - pcy) / ph;
  d.dw = std::log(target.width() / pw);
  d.dh = std::log(target.height() / ph);
  return d;
}

RoiBox decode_delta(const RoiBox& proposal, const BoxDelta& delta) {
  double pw = proposal.width(), ph = proposal.height();
  check(pw > 0.0 && ph > 0.0, "decode_delta: degenerate proposal");
  double pcx = proposal.x1 + 0.5 * pw, pcy = proposal.y1 + 0.5 * ph;
  double cx = pcx + delta.dx * pw;
  double cy = pcy + delta.dy * ph;
  double w = pw * std::exp(std::clamp(delta.dw, -kDeltaClamp, kDeltaClamp));
  double h = ph * std::exp(std::clamp(delta.dh, -kDeltaClamp, kDeltaClamp));
  RoiBox out;
  out.image_id = proposal.image_id;
  out.x1 = cx - 0.5 * w;
  out.y1 = cy - 0.5 * h;
  out.x2 = cx + 0.5 * w;
  out.y2 = cy + 0.5 * h;
  return out;
}

RoiBox decode_delta(const RoiBox& proposal, const BoxDelta& delta, double img_w, double img_h) {
  return clip_box(decode_delta(proposal, delta), img_w, img_h);
}

}  // namespace ion
