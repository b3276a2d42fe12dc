#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace monosim {

enum class ObjectClass { Car = 0, Pedestrian = 1, Cyclist = 2 };
inline constexpr std::size_t kNumClasses = 3;

std::string to_string(ObjectClass c);
std::optional<ObjectClass> class_from_string(const std::string& name);

// 3D box with KITTI-convention metadata. `x,y,z` is the box center in meters,
// `h,w,l` the dimensions, `yaw` the rotation about the vertical axis.
struct DetectionBox {
  ObjectClass label = ObjectClass::Car;
  double x = 0.0, y = 0.0, z = 0.0;
  double h = 1.0, w = 1.0, l = 1.0;
  double yaw = 0.0;
  double confidence = 1.0;
  double bbox_left = -1.0, bbox_top = -1.0, bbox_right = -1.0, bbox_bottom = -1.0;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
};

struct SoftLabelSet {
  std::int64_t frame_id = 0;
  std::vector<DetectionBox> boxes;
};

// Per-class confidence thresholds for turning teacher predictions into soft
// labels. Defaults follow the Car 0.7 / Pedestrian 0 / Cyclist 0 policy.
struct ThresholdPolicy {
  double car = 0.7;
  double pedestrian = 0.0;
  double cyclist = 0.0;

  double threshold_for(ObjectClass c) const;
  void validate() const;
};

// Keeps boxes whose confidence is at or above their class threshold;
// preserves order, never mutates kept boxes.
SoftLabelSet filter_soft_labels(const SoftLabelSet& predictions, const ThresholdPolicy& policy);

struct ParseError : std::runtime_error {
  std::size_t line = 0;
  ParseError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line(line) {}
};

// One object per line: type, truncated, occluded, alpha, 4 bbox values,
// h w l, x y z, rotation_y, optional score. Lines with a wrong field count,
// a non-numeric field or an unknown type are rejected with their line number.
SoftLabelSet parse_kitti_labels(const std::string& text);

// Space-separated, reals fixed at 6 decimals, score always present.
std::string emit_kitti_labels(const SoftLabelSet& labels);

// Uniform [0,1] confidence binning per class; the last bin includes 1.0.
std::array<std::vector<std::size_t>, kNumClasses> confidence_histogram(
    const std::vector<SoftLabelSet>& predictions, std::size_t bins);

}  // namespace monosim
