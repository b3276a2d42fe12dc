#pragma once

#include <vector>

#include "monosim/autodiff.hpp"
#include "monosim/camera.hpp"
#include "monosim/labels.hpp"

namespace monosim {

// Anchor boxes on a (feature row x depth bin) grid. Each anchor's lateral
// position is the back-projection of its row center at the bin's depth, so an
// anchor's reference box is a concrete world-frame DetectionBox.
struct AnchorGridConfig {
  std::size_t rows = 16;
  std::size_t depth_bins = 25;
  double depth_min = 4.0;
  double depth_max = 14.0;
  double anchor_h = 1.6;
  double anchor_w = 1.65;
  double anchor_l = 4.0;
  double ground_y = 1.5;
};

std::vector<DetectionBox> make_anchor_grid(const CameraModel& feature_camera,
                                           const AnchorGridConfig& config);

enum class AnchorRole { Negative, Ignore, Positive };

struct AnchorMatch {
  AnchorRole role = AnchorRole::Negative;
  std::size_t label_index = 0;  // valid when role == Positive
};

// BEV-IoU banding: >= pos_iou positive (argmax label), < neg_iou negative,
// in between ignored.
std::vector<AnchorMatch> match_anchors(const std::vector<DetectionBox>& anchors,
                                       const SoftLabelSet& labels, double pos_iou = 0.5,
                                       double neg_iou = 0.3);

// Per-anchor regression target: center offsets in meters, log dimension
// ratios, yaw.
std::array<double, 7> regression_target(const DetectionBox& anchor, const DetectionBox& label);

// Inverse of regression_target applied to predicted parameters.
DetectionBox decode_box(const DetectionBox& anchor, const double* params, double confidence);

std::vector<DetectionBox> decode_boxes(const Tensor& params, const Tensor& objectness,
                                       const std::vector<DetectionBox>& anchors);

// Greedy confidence-ordered BEV non-maximum suppression, capped at max_keep
// detections.
std::vector<DetectionBox> nms_bev(const std::vector<DetectionBox>& boxes, double iou_threshold,
                                  std::size_t max_keep);

// Toy baseline loss: smooth-L1 over matched box parameters (mean over
// positives) plus binary cross-entropy on objectness probabilities (mean over
// non-ignored anchors).
ag::Var response_loss(const ag::Var& box_params, const ag::Var& objectness,
                      const std::vector<DetectionBox>& anchors, const SoftLabelSet& labels,
                      const std::vector<AnchorMatch>& matches);

}  // namespace monosim
