#include "monosim/labels.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace monosim {

std::string to_string(ObjectClass c) {
  switch (c) {
    case ObjectClass::Car:
      return "Car";
    case ObjectClass::Pedestrian:
      return "Pedestrian";
    case ObjectClass::Cyclist:
      return "Cyclist";
  }
  return "Car";
}

std::optional<ObjectClass> class_from_string(const std::string& name) {
  if (name == "Car") return ObjectClass::Car;
  if (name == "Pedestrian") return ObjectClass::Pedestrian;
  if (name == "Cyclist") return ObjectClass::Cyclist;
  return std::nullopt;
}

double ThresholdPolicy::threshold_for(ObjectClass c) const {
  switch (c) {
    case ObjectClass::Car:
      return car;
    case ObjectClass::Pedestrian:
      return pedestrian;
    case ObjectClass::Cyclist:
      return cyclist;
  }
  return car;
}

void ThresholdPolicy::validate() const {
  for (double t : {car, pedestrian, cyclist}) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw std::invalid_argument("ThresholdPolicy: thresholds must lie in [0,1]");
    }
  }
}

SoftLabelSet filter_soft_labels(const SoftLabelSet& predictions, const ThresholdPolicy& policy) {
  policy.validate();
  SoftLabelSet kept;
  kept.frame_id = predictions.frame_id;
  for (const DetectionBox& box : predictions.boxes) {
    if (box.confidence >= policy.threshold_for(box.label)) kept.boxes.push_back(box);
  }
  return kept;
}

namespace {

double parse_number(const std::string& token, std::size_t line_no, const char* field) {
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(token, &pos);
  } catch (const std::exception&) {
    throw ParseError(line_no, std::string("non-numeric ") + field + " '" + token + "'");
  }
  if (pos != token.size()) {
    throw ParseError(line_no, std::string("non-numeric ") + field + " '" + token + "'");
  }
  return value;
}

}  // namespace

SoftLabelSet parse_kitti_labels(const std::string& text) {
  SoftLabelSet out;
  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (tokens.size() != 15 && tokens.size() != 16) {
      throw ParseError(line_no, "expected 15 or 16 fields, got " + std::to_string(tokens.size()));
    }
    auto cls = class_from_string(tokens[0]);
    if (!cls) throw ParseError(line_no, "unknown object class '" + tokens[0] + "'");

    DetectionBox box;
    box.label = *cls;
    box.truncation = parse_number(tokens[1], line_no, "truncation");
    box.occlusion = static_cast<int>(parse_number(tokens[2], line_no, "occlusion"));
    box.alpha = parse_number(tokens[3], line_no, "alpha");
    box.bbox_left = parse_number(tokens[4], line_no, "bbox left");
    box.bbox_top = parse_number(tokens[5], line_no, "bbox top");
    box.bbox_right = parse_number(tokens[6], line_no, "bbox right");
    box.bbox_bottom = parse_number(tokens[7], line_no, "bbox bottom");
    box.h = parse_number(tokens[8], line_no, "height");
    box.w = parse_number(tokens[9], line_no, "width");
    box.l = parse_number(tokens[10], line_no, "length");
    box.x = parse_number(tokens[11], line_no, "x");
    box.y = parse_number(tokens[12], line_no, "y");
    box.z = parse_number(tokens[13], line_no, "z");
    box.yaw = parse_number(tokens[14], line_no, "rotation_y");
    box.confidence = tokens.size() == 16 ? parse_number(tokens[15], line_no, "score") : 1.0;
    if (!(box.h > 0.0 && box.w > 0.0 && box.l > 0.0)) {
      throw ParseError(line_no, "non-positive box dimensions");
    }
    if (!(box.confidence >= 0.0 && box.confidence <= 1.0)) {
      throw ParseError(line_no, "score outside [0,1]");
    }
    out.boxes.push_back(box);
  }
  return out;
}

std::string emit_kitti_labels(const SoftLabelSet& labels) {
  std::string out;
  char buf[512];
  for (const DetectionBox& b : labels.boxes) {
    std::snprintf(buf, sizeof(buf),
                  "%s %.6f %d %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f\n",
                  to_string(b.label).c_str(), b.truncation, b.occlusion, b.alpha, b.bbox_left,
                  b.bbox_top, b.bbox_right, b.bbox_bottom, b.h, b.w, b.l, b.x, b.y, b.z, b.yaw,
                  b.confidence);
    out += buf;
  }
  return out;
}

std::array<std::vector<std::size_t>, kNumClasses> confidence_histogram(
    const std::vector<SoftLabelSet>& predictions, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("confidence_histogram: bins must be >= 1");
  std::array<std::vector<std::size_t>, kNumClasses> hist;
  for (auto& h : hist) h.assign(bins, 0);
  for (const SoftLabelSet& frame : predictions) {
    for (const DetectionBox& box : frame.boxes) {
      std::size_t bin = static_cast<std::size_t>(box.confidence * static_cast<double>(bins));
      if (bin >= bins) bin = bins - 1;  // right-inclusive last bin
      ++hist[static_cast<std::size_t>(box.label)][bin];
    }
  }
  return hist;
}

}  // namespace monosim
