#pragma once

#include <string>
#include <vector>

#include "monosim/labels.hpp"

namespace monosim {

// Intersection over union of the two boxes' axis-aligned bird's-eye-view
// rectangles (x extent w, z extent l; yaw ignored at this scale).
double bev_iou(const DetectionBox& a, const DetectionBox& b);

enum class RecallSet { R11, R40 };

std::string to_string(RecallSet r);

struct ApResult {
  double ap = 0.0;
  bool defined = true;
  std::string reason;
};

// Pascal-style AP: detections sorted by descending confidence, greedily
// matched against at most one ground-truth box each (IoU >= threshold),
// interpolated precision sampled over the recall set.
ApResult average_precision(const std::vector<std::vector<DetectionBox>>& detections,
                           const std::vector<std::vector<DetectionBox>>& ground_truth,
                           double iou_threshold, RecallSet recall_set);

struct ApReportRow {
  std::string object_class;
  double iou_threshold = 0.0;
  RecallSet recall_set = RecallSet::R40;
  ApResult result;
};

// CSV with columns {class, iou_threshold, recall_set, ap}.
std::string ap_report_csv(const std::vector<ApReportRow>& rows);

}  // namespace monosim
