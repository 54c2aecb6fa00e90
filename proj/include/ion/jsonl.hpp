#ifndef ION_JSONL_HPP_
#define ION_JSONL_HPP_

#include <string>
#include <vector>

#include "ion/boxes.hpp"

namespace ion {

// One JSON object per line:
//   detections:   {"image_id":i,"class_id":c,"score":s,"box":[x1,y1,x2,y2]}
//   ground truth: {"image_id":i,"class_id":c,"box":[...],"difficult":bool}
// Doubles are emitted with shortest-round-trip formatting, so write-then-read
// is lossless.

void write_detections(const std::string& path, const std::vector<Detection>& dets);
std::vector<Detection> read_detections(const std::string& path);

void write_ground_truth(const std::string& path, const std::vector<GroundTruthObject>& gts);
std::vector<GroundTruthObject> read_ground_truth(const std::string& path);

}  // namespace ion

#endif  // ION_JSONL_HPP_
