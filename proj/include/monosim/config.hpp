#pragma once

#include <iosfwd>
#include <string>

#include "monosim/labels.hpp"
#include "monosim/losses.hpp"

namespace monosim {

// Harness-wide knobs, serialized as flat key=value text.
struct HarnessConfig {
  // scene generation
  std::size_t min_boxes = 1;
  std::size_t max_boxes = 3;
  std::size_t ground_points = 600;
  std::size_t box_points = 60;
  std::size_t image_height = 64;
  std::size_t image_width = 96;
  double depth_min = 4.0;
  double depth_max = 14.0;

  // student / teacher channel widths
  std::size_t trunk_channels = 12;
  std::size_t pred_hidden = 24;
  std::size_t c_ms = 8;
  std::size_t c_ps = 16;
  std::size_t c_mr = 8;
  std::size_t c_pr = 16;
  bool global_local = true;

  // RoI voxel grid
  std::size_t voxel_x = 16;
  std::size_t voxel_y = 16;
  std::size_t voxel_z = 8;

  // anchors and inference
  std::size_t depth_bins = 25;
  double pos_iou = 0.5;
  double neg_iou = 0.3;
  double nms_iou = 0.5;
  std::size_t max_detections = 20;

  // training
  double learning_rate = 0.01;
  double lambda_scene = 1.0;
  double lambda_roi = 1.0;
  double car_threshold = 0.7;
  double ped_threshold = 0.0;
  double cyc_threshold = 0.0;
  double teacher_noise = 0.05;
  std::size_t train_scenes = 8;

  LossWeights loss_weights() const { return {lambda_scene, lambda_roi}; }
  ThresholdPolicy threshold_policy() const { return {car_threshold, ped_threshold, cyc_threshold}; }

  // derived feature-map geometry (two stride-2 stages, then one more for RoI)
  std::size_t scene_feature_height() const { return image_height / 4; }
  std::size_t scene_feature_width() const { return image_width / 4; }
  std::size_t roi_feature_height() const { return image_height / 8; }
  std::size_t roi_feature_width() const { return image_width / 8; }

  void validate() const;
};

HarnessConfig parse_config(std::istream& in);
HarnessConfig load_config_file(const std::string& path);
void save_config(std::ostream& out, const HarnessConfig& config);

}  // namespace monosim
