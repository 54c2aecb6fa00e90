#include "ion/jsonl.hpp"

#include <cmath>
#include <fstream>

#include "ion/tensor.hpp"
#include "json.hpp"

namespace ion {

namespace {

using nlohmann::json;

json box_to_json(const RoiBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

RoiBox box_from_json(const json& j, int image_id, const std::string& where) {
  check(j.is_array() && j.size() == 4, where + ": box must be [x1,y1,x2,y2]");
  RoiBox b;
  b.image_id = image_id;
  b.x1 = j[0].get<double>();
  b.y1 = j[1].get<double>();
  b.x2 = j[2].get<double>();
  b.y2 = j[3].get<double>();
  check(b.ordered(), where + ": box coordinates not ordered");
  return b;
}

template <typename Fn>
void for_each_line(const std::string& path, Fn&& fn) {
  std::ifstream is(path);
  check(is.good(), "jsonl: cannot open " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    fn(j, path + ":" + std::to_string(line_no));
  }
}

}  // namespace

void write_detections(const std::string& path, const std::vector<Detection>& dets) {
  std::ofstream os(path);
  check(os.good(), "jsonl: cannot open " + path + " for writing");
  for (const Detection& d : dets) {
    json j = {{"image_id", d.box.image_id}, {"class_id", d.class_id}, {"score", d.score}, {"box", box_to_json(d.box)}};
    os << j.dump() << "\n";
  }
  check(os.good(), "jsonl: write failed for " + path);
}

std::vector<Detection> read_detections(const std::string& path) {
  std::vector<Detection> out;
  for_each_line(path, [&](const json& j, const std::string& where) {
    check(j.contains("image_id") && j.contains("class_id") && j.contains("score") && j.contains("box"),
          where + ": detection needs image_id, class_id, score, box");
    Detection d;
    d.class_id = j["class_id"].get<int>();
    d.score = j["score"].get<double>();
    d.box = box_from_json(j["box"], j["image_id"].get<int>(), where);
    check(std::isfinite(d.score), where + ": non-finite score");
    out.push_back(d);
  });
  return out;
}

void write_ground_truth(const std::string& path, const std::vector<GroundTruthObject>& gts) {
  std::ofstream os(path);
  check(os.good(), "jsonl: cannot open " + path + " for writing");
  for (const GroundTruthObject& g : gts) {
    json j = {{"image_id", g.box.image_id},
              {"class_id", g.class_id},
              {"box", box_to_json(g.box)},
              {"difficult", g.difficult}};
    os << j.dump() << "\n";
  }
  check(os.good(), "jsonl: write failed for " + path);
}

std::vector<GroundTruthObject> read_ground_truth(const std::string& path) {
  std::vector<GroundTruthObject> out;
  for_each_line(path, [&](const json& j, const std::string& where) {
    check(j.contains("image_id") && j.contains("class_id") && j.contains("box"),
          where + ": ground truth needs image_id, class_id, box");
    GroundTruthObject g;
    g.class_id = j["class_id"].get<int>();
    g.box = box_from_json(j["box"], j["image_id"].get<int>(), where);
    g.difficult = j.value("difficult", false);
    out.push_back(g);
  });
  return out;
}

}  // namespace ion
