#include "monosim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace monosim {

double bev_iou(const DetectionBox& a, const DetectionBox& b) {
  if (!(a.w > 0.0 && a.l > 0.0 && b.w > 0.0 && b.l > 0.0)) {
    throw std::invalid_argument("bev_iou: boxes must have positive dimensions");
  }
  const double ax0 = a.x - a.w / 2.0, ax1 = a.x + a.w / 2.0;
  const double az0 = a.z - a.l / 2.0, az1 = a.z + a.l / 2.0;
  const double bx0 = b.x - b.w / 2.0, bx1 = b.x + b.w / 2.0;
  const double bz0 = b.z - b.l / 2.0, bz1 = b.z + b.l / 2.0;
  const double ix = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
  const double iz = std::max(0.0, std::min(az1, bz1) - std::max(az0, bz0));
  const double inter = ix * iz;
  const double uni = a.w * a.l + b.w * b.l - inter;
  return inter / uni;
}

std::string to_string(RecallSet r) { return r == RecallSet::R11 ? "R11" : "R40"; }

namespace {

struct ScoredDetection {
  double confidence;
  std::size_t frame;
  std::size_t index;
};

}  // namespace

ApResult average_precision(const std::vector<std::vector<DetectionBox>>& detections,
                           const std::vector<std::vector<DetectionBox>>& ground_truth,
                           double iou_threshold, RecallSet recall_set) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw std::invalid_argument("average_precision: iou_threshold must lie in (0,1]");
  }
  if (detections.size() != ground_truth.size()) {
    throw std::invalid_argument("average_precision: frame count mismatch");
  }

  std::size_t total_gt = 0;
  for (const auto& frame : ground_truth) total_gt += frame.size();
  if (total_gt == 0) {
    return {std::numeric_limits<double>::quiet_NaN(), false,
            "no ground-truth boxes in any frame"};
  }

  std::vector<ScoredDetection> order;
  for (std::size_t f = 0; f < detections.size(); ++f) {
    for (std::size_t i = 0; i < detections[f].size(); ++i) {
      order.push_back({detections[f][i].confidence, f, i});
    }
  }
  // Ties keep (frame, index) order so the ranking is reproducible.
  std::stable_sort(order.begin(), order.end(),
                   [](const ScoredDetection& a, const ScoredDetection& b) {
                     return a.confidence > b.confidence;
                   });

  std::vector<std::vector<bool>> gt_used(ground_truth.size());
  for (std::size_t f = 0; f < ground_truth.size(); ++f) {
    gt_used[f].assign(ground_truth[f].size(), false);
  }

  // One precision/recall point per detection, in rank order.
  std::vector<double> precision, recall;
  precision.reserve(order.size());
  recall.reserve(order.size());
  std::size_t tp = 0, fp = 0;
  for (const ScoredDetection& det : order) {
    const DetectionBox& box = detections[det.frame][det.index];
    const auto& gts = ground_truth[det.frame];
    double best_iou = 0.0;
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[det.frame][g]) continue;
      const double iou = bev_iou(box, gts[g]);
      if (iou > best_iou) {
        best_iou = iou;
        best_gt = g;
      }
    }
    if (best_gt < gts.size() && best_iou >= iou_threshold) {
      gt_used[det.frame][best_gt] = true;
      ++tp;
    } else {
      ++fp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
  }

  // rho(r) = max precision at recall >= r, or 0 when the curve never gets there.
  auto rho = [&](double r) {
    double best = 0.0;
    for (std::size_t i = 0; i < recall.size(); ++i) {
      if (recall[i] >= r) best = std::max(best, precision[i]);
    }
    return best;
  };

  double sum = 0.0;
  std::size_t levels = 0;
  if (recall_set == RecallSet::R11) {
    for (int k = 0; k <= 10; ++k) sum += rho(static_cast<double>(k) / 10.0);
    levels = 11;
  } else {
    for (int k = 1; k <= 40; ++k) sum += rho(static_cast<double>(k) / 40.0);
    levels = 40;
  }
  return {sum / static_cast<double>(levels), true, ""};
}

std::string ap_report_csv(const std::vector<ApReportRow>& rows) {
  std::ostringstream out;
  out << "class,iou_threshold,recall_set,ap\n";
  out.precision(12);
  for (const ApReportRow& row : rows) {
    out << row.object_class << "," << row.iou_threshold << "," << to_string(row.recall_set)
        << ",";
    if (row.result.defined) {
      out << row.result.ap;
    } else {
      out << "nan";
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace monosim
